#include "framecast/data.hpp"

#include <fstream>
#include <sstream>

#include "framecast/binio.hpp"
#include "framecast/errors.hpp"

namespace fc {

namespace {

void write_frame_raw(std::ostream& os, const Frame& f, std::uint32_t rows, std::uint32_t cols) {
    if (f.rows != rows || f.cols != cols)
        throw shape_error("frame is " + std::to_string(f.rows) + "x" + std::to_string(f.cols) +
                          ", dataset expects " + std::to_string(rows) + "x" + std::to_string(cols));
    write_bytes(os, f.pixels.data(), f.pixels.size());
}

Frame read_frame_raw(std::istream& is, std::uint32_t rows, std::uint32_t cols) {
    Frame f(rows, cols);
    read_bytes(is, f.pixels.data(), f.pixels.size());
    return f;
}

void write_vec(std::ostream& os, const std::vector<double>& v, std::uint32_t dim,
               const char* what) {
    if (v.size() != dim)
        throw shape_error(std::string(what) + " has dim " + std::to_string(v.size()) +
                          ", dataset expects " + std::to_string(dim));
    for (double x : v) write_f64le(os, x);
}

std::vector<double> read_vec(std::istream& is, std::uint32_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = read_f64le(is);
    return v;
}

} // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
    atomic_write_file(path, [&ds](std::ostream& os) {
        write_bytes(os, "FCD1", 4);
        write_u32le(os, ds.rows);
        write_u32le(os, ds.cols);
        write_u32le(os, ds.t_in);
        write_u32le(os, ds.t_out);
        write_u32le(os, ds.action_dim);
        write_u32le(os, ds.state_dim);
        write_u32le(os, static_cast<std::uint32_t>(ds.episodes.size()));
        for (const Episode& ep : ds.episodes) {
            if (ep.input_frames.size() != ds.t_in || ep.target_frames.size() != ds.t_out ||
                ep.actions.size() != ds.t_out || ep.states.size() != ds.t_out)
                throw shape_error("episode frame/trace counts do not match dataset header");
            write_u32le(os, ep.meta.trial_id);
            write_u32le(os, ep.meta.start_idx);
            write_u32le(os, ep.meta.goal_idx);
            write_f64le(os, ep.meta.kp);
            write_f64le(os, ep.meta.ki);
            write_f64le(os, ep.meta.kd);
            for (const Frame& f : ep.input_frames) write_frame_raw(os, f, ds.rows, ds.cols);
            for (const Frame& f : ep.target_frames) write_frame_raw(os, f, ds.rows, ds.cols);
            for (const auto& a : ep.actions) write_vec(os, a, ds.action_dim, "action");
            for (const auto& s : ep.states) write_vec(os, s, ds.state_dim, "state");
        }
    });
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open dataset: " + path);
    char magic[4];
    read_bytes(is, magic, 4);
    if (std::string(magic, 4) != "FCD1") throw format_error("bad dataset magic in " + path);

    Dataset ds;
    ds.rows = read_u32le(is);
    ds.cols = read_u32le(is);
    ds.t_in = read_u32le(is);
    ds.t_out = read_u32le(is);
    ds.action_dim = read_u32le(is);
    ds.state_dim = read_u32le(is);
    const std::uint32_t count = read_u32le(is);
    if (ds.rows == 0 || ds.cols == 0 || ds.t_in == 0 || ds.t_out == 0 ||
        std::uint64_t(ds.rows) * ds.cols > (1ULL << 26))
        throw format_error("dataset header out of range in " + path);

    ds.episodes.reserve(count);
    for (std::uint32_t e = 0; e < count; ++e) {
        Episode ep;
        ep.meta.trial_id = read_u32le(is);
        ep.meta.start_idx = read_u32le(is);
        ep.meta.goal_idx = read_u32le(is);
        ep.meta.kp = read_f64le(is);
        ep.meta.ki = read_f64le(is);
        ep.meta.kd = read_f64le(is);
        for (std::uint32_t k = 0; k < ds.t_in; ++k)
            ep.input_frames.push_back(read_frame_raw(is, ds.rows, ds.cols));
        for (std::uint32_t k = 0; k < ds.t_out; ++k)
            ep.target_frames.push_back(read_frame_raw(is, ds.rows, ds.cols));
        for (std::uint32_t k = 0; k < ds.t_out; ++k)
            ep.actions.push_back(read_vec(is, ds.action_dim));
        for (std::uint32_t k = 0; k < ds.t_out; ++k) ep.states.push_back(read_vec(is, ds.state_dim));
        ds.episodes.push_back(std::move(ep));
    }
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw format_error("trailing bytes in dataset " + path);
    return ds;
}

void write_pgm(const std::string& path, const Frame& frame) {
    if (frame.rows == 0 || frame.cols == 0) throw shape_error("write_pgm: empty frame");
    atomic_write_file(path, [&frame](std::ostream& os) {
        std::ostringstream header;
        header << "P5\n" << frame.cols << " " << frame.rows << "\n255\n";
        const std::string h = header.str();
        write_bytes(os, h.data(), h.size());
        write_bytes(os, frame.pixels.data(), frame.pixels.size());
    });
}

namespace {

// Skips PGM whitespace/comments between header tokens.
int next_token(std::istream& is) {
    int c = is.get();
    while (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '#') {
        if (c == '#')
            while (c != '\n' && c != EOF) c = is.get();
        c = is.get();
    }
    return c;
}

std::uint32_t read_pgm_int(std::istream& is) {
    int c = next_token(is);
    if (c < '0' || c > '9') throw format_error("bad PGM header token");
    std::uint64_t v = 0;
    while (c >= '0' && c <= '9') {
        v = v * 10 + std::uint64_t(c - '0');
        if (v > 0xFFFFFFFFULL) throw format_error("PGM header value out of range");
        c = is.get();
    }
    // c is the single whitespace byte terminating the token
    return static_cast<std::uint32_t>(v);
}

} // namespace

Frame read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open PGM: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || m1 != '5') throw format_error("not a binary PGM (P5): " + path);
    const std::uint32_t cols = read_pgm_int(is);
    const std::uint32_t rows = read_pgm_int(is);
    const std::uint32_t maxval = read_pgm_int(is);
    if (maxval != 255) throw format_error("unsupported PGM maxval " + std::to_string(maxval));
    if (rows == 0 || cols == 0 || std::uint64_t(rows) * cols > (1ULL << 26))
        throw format_error("PGM size out of range: " + path);
    Frame f(rows, cols);
    read_bytes(is, f.pixels.data(), f.pixels.size());
    return f;
}

} // namespace fc
