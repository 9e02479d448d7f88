#include "framecast/sim.hpp"

#include <algorithm>
#include <cmath>

#include "framecast/errors.hpp"

namespace fc {

namespace {

constexpr double kDiskIntensity = 40.0;
constexpr double kBackground = 220.0;
constexpr double kIntegralClamp = 10.0; // arena is the unit square

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

} // namespace

void WorldSpec::validate() const {
    if (rows == 0 || cols == 0) throw config_error("world: frame size must be >= 1");
    if (radius <= 0.0) throw config_error("world: radius must be > 0");
    if (dt <= 0.0) throw config_error("world: dt must be > 0");
    if (max_speed <= 0.0) throw config_error("world: max_speed must be > 0");
    if (noise_sigma < 0.0) throw config_error("world: noise_sigma must be >= 0");
    if (starts.empty() || goals.empty()) throw config_error("world: starts/goals must be nonempty");
}

Vec2 pid_step(const PidGains& gains, const Vec2& pos, PidMemory& mem, const Vec2& goal,
              double dt) {
    if (dt <= 0.0) throw config_error("pid_step: dt must be > 0");
    const Vec2 e{goal.x - pos.x, goal.y - pos.y};
    mem.integral.x = std::clamp(mem.integral.x + e.x * dt, -kIntegralClamp, kIntegralClamp);
    mem.integral.y = std::clamp(mem.integral.y + e.y * dt, -kIntegralClamp, kIntegralClamp);
    Vec2 deriv{0.0, 0.0};
    if (mem.primed) {
        deriv.x = (e.x - mem.prev_error.x) / dt;
        deriv.y = (e.y - mem.prev_error.y) / dt;
    }
    mem.prev_error = e;
    mem.primed = true;
    return {gains.kp * e.x + gains.ki * mem.integral.x + gains.kd * deriv.x,
            gains.kp * e.y + gains.ki * mem.integral.y + gains.kd * deriv.y};
}

void sim_step(const WorldSpec& spec, const PidGains& gains, BodyState& body, PidMemory& mem,
              const Vec2& goal) {
    const Vec2 u = pid_step(gains, body.pos, mem, goal, spec.dt);
    body.vel.x += u.x * spec.dt;
    body.vel.y += u.y * spec.dt;
    const double speed = std::hypot(body.vel.x, body.vel.y);
    if (speed > spec.max_speed) {
        const double s = spec.max_speed / speed;
        body.vel.x *= s;
        body.vel.y *= s;
    }
    body.pos.x += body.vel.x * spec.dt;
    body.pos.y += body.vel.y * spec.dt;
    if (body.pos.x < 0.0 || body.pos.x > 1.0) {
        body.pos.x = clamp01(body.pos.x);
        body.vel.x = 0.0;
    }
    if (body.pos.y < 0.0 || body.pos.y > 1.0) {
        body.pos.y = clamp01(body.pos.y);
        body.vel.y = 0.0;
    }
}

std::vector<Vec2> simulate_trial(const WorldSpec& spec, const PidGains& gains, const Vec2& start,
                                 const Vec2& goal) {
    spec.validate();
    std::vector<Vec2> positions{start};
    BodyState body{start, {0.0, 0.0}};
    PidMemory mem;
    for (std::uint32_t step = 0; step < spec.max_steps; ++step) {
        sim_step(spec, gains, body, mem, goal);
        positions.push_back(body.pos);
        if (std::hypot(goal.x - body.pos.x, goal.y - body.pos.y) < spec.radius) break;
    }
    return positions;
}

Frame render(const Vec2& pos, const WorldSpec& spec, Rng* noise_rng) {
    const double px_w = 1.0 / spec.cols;
    const double px_h = 1.0 / spec.rows;
    const double px_max = std::max(px_w, px_h);
    const double r = std::max(spec.radius, 0.75 * px_max); // radius floor: >= 1 visible pixel
    const double half_diag = 0.5 * std::hypot(px_w, px_h);

    Frame f(spec.rows, spec.cols);
    for (std::uint32_t i = 0; i < spec.rows; ++i) {
        const double cy = (i + 0.5) * px_h;
        for (std::uint32_t j = 0; j < spec.cols; ++j) {
            const double cx = (j + 0.5) * px_w;
            const double d = std::hypot(cx - pos.x, cy - pos.y);
            double coverage;
            if (d <= r - half_diag) {
                coverage = 1.0;
            } else if (d >= r + half_diag) {
                coverage = 0.0;
            } else {
                // 4x4 subsamples approximate the covered area of edge pixels
                int inside = 0;
                for (int si = 0; si < 4; ++si) {
                    const double sy = (i + (si + 0.5) / 4.0) * px_h;
                    for (int sj = 0; sj < 4; ++sj) {
                        const double sx = (j + (sj + 0.5) / 4.0) * px_w;
                        const double dx = sx - pos.x, dy = sy - pos.y;
                        if (dx * dx + dy * dy <= r * r) ++inside;
                    }
                }
                coverage = inside / 16.0;
            }
            double v = kBackground + (kDiskIntensity - kBackground) * coverage;
            if (noise_rng && spec.noise_sigma > 0.0) v += noise_rng->normal(0.0, spec.noise_sigma);
            v = std::min(255.0, std::max(0.0, v));
            f.at(i, j) = static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return f;
}

namespace {

Frame render_step(const WorldSpec& spec, const Vec2& view_pos, std::uint64_t trial_seed,
                  std::uint64_t frame_stream) {
    if (spec.noise_sigma > 0.0) {
        Rng noise = derive_rng(trial_seed, frame_stream);
        return render(view_pos, spec, &noise);
    }
    return render(view_pos, spec, nullptr);
}

} // namespace

GenResult generate_dataset(const WorldSpec& spec, std::uint32_t trials, std::uint32_t t_in,
                           std::uint32_t t_out) {
    spec.validate();
    if (trials == 0) throw config_error("generate_dataset: trials must be >= 1");
    if (t_in == 0 || t_out == 0) throw config_error("generate_dataset: t_in/t_out must be >= 1");

    constexpr std::uint32_t kActionDim = 2;
    constexpr std::uint32_t kStateDim = 4;
    const Vec2 ego_home{0.5, 0.5};

    GenResult result;
    Dataset& ds = result.dataset;
    ds.rows = spec.rows;
    ds.cols = spec.cols;
    ds.t_in = t_in;
    ds.t_out = t_out;
    ds.action_dim = kActionDim;
    ds.state_dim = kStateDim;

    const std::uint32_t window = t_in + t_out;
    for (std::uint32_t trial = 0; trial < trials; ++trial) {
        Rng rng = derive_rng(spec.seed, trial);
        const std::uint64_t trial_seed = rng.next_u64();
        const std::size_t start_idx = rng.uniform_index(spec.starts.size());
        const std::size_t goal_idx = rng.uniform_index(spec.goals.size());
        PidGains gains{rng.uniform(spec.kp_lo, spec.kp_hi),
                       spec.ki_hi > spec.ki_lo ? rng.uniform(spec.ki_lo, spec.ki_hi) : spec.ki_lo,
                       rng.uniform(spec.kd_lo, spec.kd_hi)};

        const std::vector<Vec2> traj =
            simulate_trial(spec, gains, spec.starts[start_idx], spec.goals[goal_idx]);
        const std::uint32_t windows = static_cast<std::uint32_t>(traj.size()) / window;
        if (windows == 0) {
            ++result.skipped_trials;
            continue;
        }

        for (std::uint32_t w = 0; w < windows; ++w) {
            Episode ep;
            ep.meta.trial_id = trial;
            ep.meta.start_idx = static_cast<std::uint32_t>(start_idx);
            ep.meta.goal_idx = static_cast<std::uint32_t>(goal_idx);
            ep.meta.kp = gains.kp;
            ep.meta.ki = gains.ki;
            ep.meta.kd = gains.kd;

            Vec2 ego_vel{0.0, 0.0};
            if (spec.moving_observer) {
                ego_vel.x = rng.uniform(-spec.ego_speed_max, spec.ego_speed_max);
                ego_vel.y = rng.uniform(-spec.ego_speed_max, spec.ego_speed_max);
            }

            const std::size_t base = std::size_t(w) * window;
            for (std::uint32_t k = 0; k < t_in; ++k)
                ep.input_frames.push_back(
                    render_step(spec, traj[base + k], trial_seed, base + k));

            // During prediction steps the observer moves with its commanded
            // velocity; the scene shifts accordingly.
            for (std::uint32_t k = 1; k <= t_out; ++k) {
                const Vec2 obj = traj[base + t_in - 1 + k];
                const Vec2 ego_off{ego_vel.x * spec.dt * k, ego_vel.y * spec.dt * k};
                const Vec2 view{obj.x - ego_off.x, obj.y - ego_off.y};
                ep.target_frames.push_back(render_step(
                    spec, view, trial_seed, (std::uint64_t(w) << 32) + base + t_in - 1 + k));
                ep.actions.push_back({ego_vel.x, ego_vel.y});
                const Vec2 ego_pose{ego_home.x + ego_vel.x * spec.dt * (k - 1),
                                    ego_home.y + ego_vel.y * spec.dt * (k - 1)};
                ep.states.push_back({ego_pose.x, ego_pose.y, ego_vel.x, ego_vel.y});
            }
            ds.episodes.push_back(std::move(ep));
        }
    }
    return result;
}

GenResult generate_dataset_episodes(const WorldSpec& spec, std::uint32_t episodes,
                                    std::uint32_t t_in, std::uint32_t t_out) {
    if (episodes == 0) throw config_error("generate_dataset_episodes: episodes must be >= 1");
    // grow the trial count until enough windows exist
    std::uint32_t trials = std::max<std::uint32_t>(1, episodes / 4);
    GenResult result = generate_dataset(spec, trials, t_in, t_out);
    while (result.dataset.episodes.size() < episodes) {
        if (trials > episodes * 64 + 1024)
            throw config_error("generate_dataset_episodes: trials keep producing too few episodes");
        trials *= 2;
        result = generate_dataset(spec, trials, t_in, t_out);
    }
    result.dataset.episodes.resize(episodes);
    return result;
}

} // namespace fc
