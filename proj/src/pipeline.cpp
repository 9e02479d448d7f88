#include "framecast/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "framecast/errors.hpp"

namespace fc {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw config_error("config: bad boolean for " + key + ": '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw config_error("config: bad number for " + key + ": '" + v + "'");
    }
    if (used != v.size()) throw config_error("config: bad number for " + key + ": '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    unsigned long long out;
    try {
        out = std::stoull(v, &used);
    } catch (const std::exception&) {
        throw config_error("config: bad integer for " + key + ": '" + v + "'");
    }
    if (used != v.size()) throw config_error("config: bad integer for " + key + ": '" + v + "'");
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

} // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
    auto u = [&] { return static_cast<std::size_t>(parse_u64(key, value)); };
    auto r = [&] { return parse_real(key, value); };
    auto b = [&] { return parse_bool(key, value); };

    if (key == "frame_rows") frame_rows = u();
    else if (key == "frame_cols") frame_cols = u();
    else if (key == "feature_dim") feature_dim = u();
    else if (key == "hidden_dim") hidden_dim = u();
    else if (key == "t_in") t_in = u();
    else if (key == "t_out") t_out = u();
    else if (key == "action_dim") action_dim = u();
    else if (key == "state_dim") state_dim = u();
    else if (key == "conditioned") conditioned = b();
    else if (key == "recon_reversed") recon_reversed = b();
    else if (key == "teacher_forcing") teacher_forcing = b();
    else if (key == "init_scale") init_scale = r();
    else if (key == "forget_bias") forget_bias = r();
    else if (key == "algorithm") {
        if (value != "adam" && value != "sgd")
            throw config_error("config: algorithm must be adam or sgd, got '" + value + "'");
        algorithm = value;
    }
    else if (key == "learning_rate") learning_rate = r();
    else if (key == "momentum") momentum = r();
    else if (key == "beta1") beta1 = r();
    else if (key == "beta2") beta2 = r();
    else if (key == "adam_eps") adam_eps = r();
    else if (key == "clip_norm") clip_norm = r();
    else if (key == "epochs") epochs = u();
    else if (key == "batch_size") batch_size = u();
    else if (key == "seed") seed = parse_u64(key, value);
    else if (key == "workers") workers = u();
    else if (key == "freeze_dense") freeze_dense = b();
    else if (key == "pretrain_epochs") pretrain_epochs = u();
    else if (key == "pretrain_batch_size") pretrain_batch_size = u();
    else if (key == "radius") radius = r();
    else if (key == "kp_lo") kp_lo = r();
    else if (key == "kp_hi") kp_hi = r();
    else if (key == "ki_lo") ki_lo = r();
    else if (key == "ki_hi") ki_hi = r();
    else if (key == "kd_lo") kd_lo = r();
    else if (key == "kd_hi") kd_hi = r();
    else if (key == "dt") dt = r();
    else if (key == "max_speed") max_speed = r();
    else if (key == "noise_sigma") noise_sigma = r();
    else if (key == "max_steps") max_steps = u();
    else if (key == "moving_observer") moving_observer = b();
    else if (key == "ego_speed_max") ego_speed_max = r();
    else if (key == "episodes") episodes = u();
    else if (key == "gaussian_sigma") gaussian_sigma = r();
    else if (key == "invert") invert = b();
    else if (key == "scale_to_unit") scale_to_unit = b();
    else throw config_error("config: unknown key '" + key + "'");
}

void PipelineConfig::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config: missing '=' at " + path + ":" + std::to_string(lineno));
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void PipelineConfig::apply_env() {
    if (const char* env = std::getenv("FRAMECAST_SEED"); env && *env)
        seed = parse_u64("FRAMECAST_SEED", env);
}

std::string PipelineConfig::resolved() const {
    std::ostringstream os;
    os << "action_dim=" << action_dim << "\n"
       << "adam_eps=" << adam_eps << "\n"
       << "algorithm=" << algorithm << "\n"
       << "batch_size=" << batch_size << "\n"
       << "beta1=" << beta1 << "\n"
       << "beta2=" << beta2 << "\n"
       << "clip_norm=" << clip_norm << "\n"
       << "conditioned=" << (conditioned ? 1 : 0) << "\n"
       << "dt=" << dt << "\n"
       << "ego_speed_max=" << ego_speed_max << "\n"
       << "episodes=" << episodes << "\n"
       << "epochs=" << epochs << "\n"
       << "feature_dim=" << feature_dim << "\n"
       << "forget_bias=" << forget_bias << "\n"
       << "frame_cols=" << frame_cols << "\n"
       << "frame_rows=" << frame_rows << "\n"
       << "freeze_dense=" << (freeze_dense ? 1 : 0) << "\n"
       << "gaussian_sigma=" << gaussian_sigma << "\n"
       << "hidden_dim=" << hidden_dim << "\n"
       << "init_scale=" << init_scale << "\n"
       << "invert=" << (invert ? 1 : 0) << "\n"
       << "kd_hi=" << kd_hi << "\n"
       << "kd_lo=" << kd_lo << "\n"
       << "ki_hi=" << ki_hi << "\n"
       << "ki_lo=" << ki_lo << "\n"
       << "kp_hi=" << kp_hi << "\n"
       << "kp_lo=" << kp_lo << "\n"
       << "learning_rate=" << learning_rate << "\n"
       << "max_speed=" << max_speed << "\n"
       << "max_steps=" << max_steps << "\n"
       << "momentum=" << momentum << "\n"
       << "moving_observer=" << (moving_observer ? 1 : 0) << "\n"
       << "noise_sigma=" << noise_sigma << "\n"
       << "pretrain_batch_size=" << pretrain_batch_size << "\n"
       << "pretrain_epochs=" << pretrain_epochs << "\n"
       << "radius=" << radius << "\n"
       << "recon_reversed=" << (recon_reversed ? 1 : 0) << "\n"
       << "scale_to_unit=" << (scale_to_unit ? 1 : 0) << "\n"
       << "seed=" << seed << "\n"
       << "state_dim=" << state_dim << "\n"
       << "t_in=" << t_in << "\n"
       << "t_out=" << t_out << "\n"
       << "teacher_forcing=" << (teacher_forcing ? 1 : 0) << "\n"
       << "workers=" << workers << "\n";
    return os.str();
}

ModelConfig PipelineConfig::model_config() const {
    ModelConfig c;
    c.frame_rows = frame_rows;
    c.frame_cols = frame_cols;
    c.feature_dim = feature_dim;
    c.hidden_dim = hidden_dim;
    c.t_in = t_in;
    c.t_out = t_out;
    c.action_dim = action_dim;
    c.state_dim = state_dim;
    c.conditioned = conditioned;
    c.recon_reversed = recon_reversed;
    c.teacher_forcing = teacher_forcing;
    return c;
}

OptimConfig PipelineConfig::optim_config() const {
    OptimConfig c;
    c.algorithm = algorithm == "sgd" ? OptimAlgo::sgd : OptimAlgo::adam;
    c.learning_rate = learning_rate;
    c.momentum = momentum;
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.adam_eps = adam_eps;
    c.clip_norm = clip_norm;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.seed = seed;
    c.workers = workers;
    c.freeze_dense = freeze_dense;
    return c;
}

WorldSpec PipelineConfig::world_spec() const {
    WorldSpec w;
    w.rows = static_cast<std::uint32_t>(frame_rows);
    w.cols = static_cast<std::uint32_t>(frame_cols);
    w.radius = radius;
    w.kp_lo = kp_lo;
    w.kp_hi = kp_hi;
    w.ki_lo = ki_lo;
    w.ki_hi = ki_hi;
    w.kd_lo = kd_lo;
    w.kd_hi = kd_hi;
    w.dt = dt;
    w.max_speed = max_speed;
    w.noise_sigma = noise_sigma;
    w.seed = seed;
    w.max_steps = static_cast<std::uint32_t>(max_steps);
    w.moving_observer = moving_observer;
    w.ego_speed_max = ego_speed_max;
    return w;
}

PrepConfig PipelineConfig::prep_config() const {
    PrepConfig p;
    p.gaussian_sigma = gaussian_sigma;
    p.invert = invert;
    p.scale_to_unit = scale_to_unit;
    return p;
}

} // namespace fc
