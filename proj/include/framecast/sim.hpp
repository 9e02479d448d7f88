#pragma once

#include <cstdint>
#include <vector>

#include "framecast/data.hpp"
#include "framecast/tensor.hpp"

namespace fc {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct PidGains {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
};

/// Controller memory carried across steps.
struct PidMemory {
    Vec2 integral;
    Vec2 prev_error;
    bool primed = false; // derivative term inactive until the first error is seen
};

/// Point-mass body driven by the controller.
struct BodyState {
    Vec2 pos;
    Vec2 vel;
};

/// Unit-square arena with a PID-driven disk. The paper's trial layout: the
/// target is sent to one of 4 goals from one of 3 starts under randomized
/// gains, watched by a stationary observer; moving_observer adds a commanded
/// camera velocity per episode and records it as the action trace.
struct WorldSpec {
    std::uint32_t rows = 64;
    std::uint32_t cols = 64;
    double radius = 0.08;      // fraction of the arena
    std::vector<Vec2> starts = {{0.2, 0.2}, {0.2, 0.8}, {0.8, 0.2}};
    std::vector<Vec2> goals = {{0.8, 0.8}, {0.8, 0.45}, {0.45, 0.8}, {0.65, 0.3}};
    double kp_lo = 2.0, kp_hi = 6.0;
    double ki_lo = 0.0, ki_hi = 0.5;
    double kd_lo = 2.0, kd_hi = 6.0;
    double dt = 0.1;
    double max_speed = 0.5;    // arena units per second
    double noise_sigma = 0.0;  // sensor noise in intensity units
    std::uint64_t seed = 1;
    std::uint32_t max_steps = 240;
    bool moving_observer = false;
    double ego_speed_max = 0.3;

    void validate() const;
};

/// One PID update: per-axis u = Kp*e + Ki*int(e) + Kd*de/dt with
/// e = goal - pos. The integral is clamped at +-10 arena units.
Vec2 pid_step(const PidGains& gains, const Vec2& pos, PidMemory& mem, const Vec2& goal, double dt);

/// Advances the point mass one tick: acceleration from pid_step, velocity
/// clamped to max_speed, position clamped to the arena (velocity zeroed on
/// contact).
void sim_step(const WorldSpec& spec, const PidGains& gains, BodyState& body, PidMemory& mem,
              const Vec2& goal);

/// Positions visited from start until the goal is within the disk radius or
/// max_steps elapse. Always contains the start.
std::vector<Vec2> simulate_trial(const WorldSpec& spec, const PidGains& gains, const Vec2& start,
                                 const Vec2& goal);

/// Dark disk (intensity 40) on a light background (220), edges anti-aliased
/// by pixel coverage. noise_rng, when given, adds clamped Gaussian sensor
/// noise. The disk radius is floored so it always covers at least a pixel.
Frame render(const Vec2& pos, const WorldSpec& spec, Rng* noise_rng = nullptr);

struct GenResult {
    Dataset dataset;
    std::uint32_t skipped_trials = 0; // trajectories shorter than one window
};

/// Runs `trials` PID trials and slices each trajectory into non-overlapping
/// (t_in + t_out)-frame episodes. Deterministic: every trial derives its own
/// stream from (seed, trial id).
GenResult generate_dataset(const WorldSpec& spec, std::uint32_t trials, std::uint32_t t_in,
                           std::uint32_t t_out);

/// Keeps adding trials until `episodes` episodes exist, then truncates.
GenResult generate_dataset_episodes(const WorldSpec& spec, std::uint32_t episodes,
                                    std::uint32_t t_in, std::uint32_t t_out);

} // namespace fc
