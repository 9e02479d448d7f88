#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "framecast/sim.hpp"

using namespace fc;

TEST_CASE("pid_step at the goal with clean memory outputs zero") {
    PidGains g{3.0, 0.5, 1.0};
    PidMemory mem;
    Vec2 u = pid_step(g, {0.4, 0.6}, mem, {0.4, 0.6}, 0.1);
    CHECK(u.x == 0.0);
    CHECK(u.y == 0.0);
}

TEST_CASE("pure proportional control returns Kp*e") {
    PidGains g{1.0, 0.0, 0.0};
    PidMemory mem;
    Vec2 u = pid_step(g, {0.0, 0.0}, mem, {0.5, 0.0}, 0.1);
    CHECK(u.x == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(u.y == 0.0);
}

TEST_CASE("integral term accumulates and is clamped") {
    PidGains g{0.0, 1.0, 0.0};
    PidMemory mem;
    Vec2 u1 = pid_step(g, {0.0, 0.0}, mem, {1.0, 0.0}, 0.5);
    CHECK(u1.x == doctest::Approx(0.5));
    Vec2 u2 = pid_step(g, {0.0, 0.0}, mem, {1.0, 0.0}, 0.5);
    CHECK(u2.x == doctest::Approx(1.0));
    for (int i = 0; i < 100; ++i) pid_step(g, {0.0, 0.0}, mem, {1.0, 0.0}, 0.5);
    CHECK(mem.integral.x <= 10.0);
}

TEST_CASE("critically-damped gains reach every default goal from every start") {
    WorldSpec spec;
    spec.rows = 32;
    spec.cols = 32;
    PidGains gains{4.0, 0.0, 4.0};
    for (const Vec2& start : spec.starts) {
        for (const Vec2& goal : spec.goals) {
            auto traj = simulate_trial(spec, gains, start, goal);
            REQUIRE(traj.size() >= 2);
            CHECK(traj.size() < 200);
            const Vec2 last = traj.back();
            CHECK(std::hypot(goal.x - last.x, goal.y - last.y) < spec.radius);
        }
    }
}

TEST_CASE("object center never leaves the arena and never teleports") {
    WorldSpec spec;
    spec.max_steps = 150;
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        PidGains gains{rng.uniform(2.0, 6.0), rng.uniform(0.0, 0.5), rng.uniform(2.0, 6.0)};
        const Vec2 start = spec.starts[rng.uniform_index(3)];
        const Vec2 goal = spec.goals[rng.uniform_index(4)];
        auto traj = simulate_trial(spec, gains, start, goal);
        for (std::size_t k = 0; k < traj.size(); ++k) {
            CHECK(traj[k].x >= 0.0);
            CHECK(traj[k].x <= 1.0);
            CHECK(traj[k].y >= 0.0);
            CHECK(traj[k].y <= 1.0);
            if (k > 0) {
                const double step =
                    std::hypot(traj[k].x - traj[k - 1].x, traj[k].y - traj[k - 1].y);
                CHECK(step <= spec.max_speed * spec.dt + 1e-12);
            }
        }
    }
}

TEST_CASE("render geometry: centered disk, clean corners") {
    WorldSpec spec;
    spec.rows = 32;
    spec.cols = 32;
    spec.radius = 0.1;
    Frame f = render({0.5, 0.5}, spec);
    CHECK(f.at(16, 16) == 40);
    CHECK(f.at(0, 0) == 220);
    CHECK(f.at(31, 31) == 220);
}

TEST_CASE("disk area matches pi r^2 within 10 percent") {
    WorldSpec spec;
    spec.rows = 64;
    spec.cols = 64;
    spec.radius = 0.15;
    Frame f = render({0.5, 0.5}, spec);
    double covered = 0.0;
    for (std::uint8_t v : f.pixels) covered += (220.0 - v) / 180.0;
    const double area_frac = covered / (64.0 * 64.0);
    const double expected = 3.14159265358979 * 0.15 * 0.15;
    CHECK(std::abs(area_frac - expected) / expected < 0.10);
}

TEST_CASE("renders are deterministic, including under noise") {
    WorldSpec spec;
    spec.rows = 24;
    spec.cols = 24;
    spec.noise_sigma = 8.0;
    Rng n1(42), n2(42);
    Frame a = render({0.3, 0.7}, spec, &n1);
    Frame b = render({0.3, 0.7}, spec, &n2);
    CHECK(a.pixels == b.pixels);
}

TEST_CASE("radius floor keeps a tiny disk visible") {
    WorldSpec spec;
    spec.rows = 32;
    spec.cols = 32;
    spec.radius = 1e-4;
    Frame f = render({0.4712, 0.5317}, spec);
    int non_bg = 0;
    for (std::uint8_t v : f.pixels) non_bg += v != 220;
    CHECK(non_bg >= 1);
}

TEST_CASE("generate_dataset: counts, ranges, shapes") {
    WorldSpec spec;
    spec.rows = 32;
    spec.cols = 32;
    spec.seed = 9;
    GenResult gen = generate_dataset_episodes(spec, 20, 5, 5);
    REQUIRE(gen.dataset.episodes.size() == 20);
    CHECK(gen.dataset.episodes.size() * 5 == 100); // input frame count
    for (const Episode& ep : gen.dataset.episodes) {
        CHECK(ep.input_frames.size() == 5);
        CHECK(ep.target_frames.size() == 5);
        CHECK(ep.actions.size() == 5);
        CHECK(ep.states.size() == 5);
        for (const Frame& f : ep.input_frames) {
            CHECK(f.rows == 32);
            CHECK(f.cols == 32);
        }
        for (const auto& a : ep.actions) {
            CHECK(a.size() == 2);
            CHECK(a[0] == 0.0); // stationary observer
            CHECK(a[1] == 0.0);
        }
        for (const auto& s : ep.states) CHECK(s.size() == 4);
    }
}

TEST_CASE("identical seeds give byte-identical dataset files") {
    WorldSpec spec;
    spec.rows = 16;
    spec.cols = 16;
    spec.seed = 33;
    spec.noise_sigma = 4.0;
    GenResult a = generate_dataset(spec, 5, 3, 2);
    GenResult b = generate_dataset(spec, 5, 3, 2);
    save_dataset("t_sim_a.fcd", a.dataset);
    save_dataset("t_sim_b.fcd", b.dataset);
    std::ifstream fa("t_sim_a.fcd", std::ios::binary), fb("t_sim_b.fcd", std::ios::binary);
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
    std::remove("t_sim_a.fcd");
    std::remove("t_sim_b.fcd");
}

TEST_CASE("short trajectories are skipped and counted") {
    WorldSpec spec;
    spec.rows = 16;
    spec.cols = 16;
    spec.max_steps = 3; // every trajectory is shorter than one 5-frame window
    GenResult gen = generate_dataset(spec, 4, 3, 2);
    CHECK(gen.dataset.episodes.empty());
    CHECK(gen.skipped_trials == 4);
}

TEST_CASE("moving observer records its commanded velocity and shifts the scene") {
    WorldSpec spec;
    spec.rows = 32;
    spec.cols = 32;
    spec.seed = 21;
    spec.moving_observer = true;
    GenResult gen = generate_dataset_episodes(spec, 4, 3, 3);
    bool any_nonzero_action = false;
    for (const Episode& ep : gen.dataset.episodes) {
        for (const auto& a : ep.actions) any_nonzero_action |= a[0] != 0.0 || a[1] != 0.0;
        // state trace integrates the commanded velocity from the arena center
        CHECK(ep.states[0][0] == doctest::Approx(0.5));
        CHECK(ep.states[0][1] == doctest::Approx(0.5));
        for (std::size_t k = 1; k < ep.states.size(); ++k) {
            CHECK(ep.states[k][0] ==
                  doctest::Approx(0.5 + ep.actions[k][0] * spec.dt * k).epsilon(1e-12));
        }
    }
    CHECK(any_nonzero_action);

    // same seed with a stationary observer gives different target frames
    WorldSpec stat = spec;
    stat.moving_observer = false;
    GenResult gs = generate_dataset_episodes(stat, 4, 3, 3);
    bool any_target_differs = false;
    for (std::size_t e = 0; e < 4; ++e)
        for (std::size_t k = 0; k < 3; ++k)
            any_target_differs |= gs.dataset.episodes[e].target_frames[k].pixels !=
                                  gen.dataset.episodes[e].target_frames[k].pixels;
    CHECK(any_target_differs);
}

TEST_CASE("world validation rejects nonsense") {
    WorldSpec spec;
    spec.radius = 0.0;
    CHECK_THROWS_AS(spec.validate(), config_error);
    spec.radius = 0.1;
    spec.dt = 0.0;
    CHECK_THROWS_AS(spec.validate(), config_error);
    spec.dt = 0.1;
    spec.noise_sigma = -1.0;
    CHECK_THROWS_AS(spec.validate(), config_error);
}
