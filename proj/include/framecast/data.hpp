#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fc {

/// Grayscale frame, 8-bit intensities, row-major.
struct Frame {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;

    Frame() = default;
    Frame(std::uint32_t r, std::uint32_t c) : rows(r), cols(c), pixels(std::size_t(r) * c, 0) {}

    std::uint8_t& at(std::uint32_t i, std::uint32_t j) { return pixels[std::size_t(i) * cols + j]; }
    std::uint8_t at(std::uint32_t i, std::uint32_t j) const {
        return pixels[std::size_t(i) * cols + j];
    }
};

struct EpisodeMeta {
    std::uint32_t trial_id = 0;
    std::uint32_t start_idx = 0;
    std::uint32_t goal_idx = 0;
    double kp = 0.0, ki = 0.0, kd = 0.0;
};

/// One training unit: t_in observed frames, t_out future frames, and the
/// per-step action/state traces aligned with the future frames.
struct Episode {
    EpisodeMeta meta;
    std::vector<Frame> input_frames;
    std::vector<Frame> target_frames;
    std::vector<std::vector<double>> actions; // t_out x action_dim
    std::vector<std::vector<double>> states;  // t_out x state_dim
};

struct Dataset {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t t_in = 0;
    std::uint32_t t_out = 0;
    std::uint32_t action_dim = 0;
    std::uint32_t state_dim = 0;
    std::vector<Episode> episodes;
};

// Binary container, magic "FCD1", little-endian header, raw u8 frames,
// f64 action/state payload. Byte-identical round-trips.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, const Frame& frame);
Frame read_pgm(const std::string& path);

} // namespace fc
