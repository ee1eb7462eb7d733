#include <doctest.h>

#include <cmath>

#include "splatsim/engine.hpp"
#include "splatsim/error.hpp"
#include "splatsim/threading.hpp"

#include "test_util.hpp"

using namespace splatsim;

namespace {

Material elastic_material(double E, double nu, double density) {
    Material m;
    m.model.elasticity = Elasticity::FixedCorotated;
    m.model.plasticity = Plasticity::None;
    m.params = make_material_params(E, nu, density);
    return m;
}

ParticleState particle_at(const Vec3& x, double mass = 1.0, double volume = 1.0) {
    ParticleState p;
    p.x = x;
    p.mass = mass;
    p.volume0 = volume;
    return p;
}

EulerianGrid test_grid(int n = 12, double dx = 0.1) {
    return EulerianGrid(Vec3::Zero(), dx, Vec3i::Constant(n));
}

SimConfig quiet_config(double dt = 1e-4) {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.boundary.fill(BoundaryType::None);
    return cfg;
}

struct WorkerGuard {
    explicit WorkerGuard(int n) { set_worker_count(n); }
    ~WorkerGuard() { set_worker_count(0); } // back to auto-detect
};

} // namespace

TEST_SUITE("mpm") {

TEST_CASE("bspline weights on a node: 0.75 center, 0.125 neighbors") {
    const EulerianGrid grid = test_grid();
    const Vec3 xp = grid.node_position(5, 5, 5);
    const BsplineStencil st = bspline_stencil(xp, grid);
    for (int a = 0; a < 3; ++a) {
        CHECK(st.w[a][0] == doctest::Approx(0.125));
        CHECK(st.w[a][1] == doctest::Approx(0.75));
        CHECK(st.w[a][2] == doctest::Approx(0.125));
    }
}

TEST_CASE("bspline partition of unity, zero gradient sum, linear reproduction") {
    const EulerianGrid grid = test_grid();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(0.21, 0.94);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 xp(pos(rng), pos(rng), pos(rng));
        const auto nodes = bspline_weights(xp, grid);
        double w_sum = 0.0;
        Vec3 grad_sum = Vec3::Zero();
        Vec3 x_weighted = Vec3::Zero();
        Mat3 grad_x = Mat3::Zero();
        for (const auto& wn : nodes) {
            CHECK(wn.weight >= 0.0);
            w_sum += wn.weight;
            grad_sum += wn.weight_gradient;
            const Vec3 xi = grid.node_position(wn.node.x(), wn.node.y(), wn.node.z());
            x_weighted += wn.weight * xi;
            grad_x += wn.weight_gradient * xi.transpose();
        }
        CHECK(std::abs(w_sum - 1.0) < 1e-12);
        CHECK(grad_sum.norm() < 1e-10);
        CHECK((x_weighted - xp).norm() < 1e-12);
        CHECK((grad_x - Mat3::Identity()).norm() < 1e-10); // gradient linear consistency
    }
}

TEST_CASE("bspline rejects positions near the boundary with the particle index") {
    const EulerianGrid grid = test_grid();
    try {
        bspline_stencil(Vec3(0.01, 0.5, 0.5), grid, 42);
        FAIL("expected OutOfDomainError");
    } catch (const OutOfDomainError& e) {
        CHECK(e.particle == 42);
    }
}

TEST_CASE("p2g: one particle on a node") {
    EulerianGrid grid = test_grid();
    const Vec3 xp = grid.node_position(5, 6, 7);
    auto p = particle_at(xp, 2.0);
    p.v = Vec3(1, -2, 3);
    MpmEngine engine(grid, {p}, {elastic_material(1e4, 0.3, 1000)}, quiet_config());
    engine.p2g();

    const auto& g = engine.grid();
    CHECK(g.mass[g.node_index(5, 6, 7)] == doctest::Approx(2.0 * 0.75 * 0.75 * 0.75));
    CHECK((g.velocity[g.node_index(5, 6, 7)] - Vec3(1, -2, 3)).norm() < 1e-14);
    CHECK((g.velocity[g.node_index(4, 6, 7)] - Vec3(1, -2, 3)).norm() < 1e-14);
    double total = 0.0;
    for (double m : g.mass) total += m;
    CHECK(total == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("p2g conserves mass and momentum, including affine C") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(0.25, 0.95);
    std::uniform_real_distribution<double> vel(0.5, 1.5);
    std::uniform_real_distribution<double> cval(-2.0, 2.0);
    std::vector<ParticleState> particles;
    for (int i = 0; i < 100; ++i) {
        auto p = particle_at(Vec3(pos(rng), pos(rng), pos(rng)), vel(rng));
        p.v = Vec3(vel(rng), vel(rng), vel(rng));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) p.C(r, c) = cval(rng);
        particles.push_back(p);
    }
    MpmEngine engine(test_grid(), particles, {elastic_material(1e4, 0.3, 1000)}, quiet_config());
    engine.p2g();

    double grid_mass = 0.0;
    for (double m : engine.grid().mass) grid_mass += m;
    CHECK(std::abs(grid_mass - engine.total_mass()) <= 1e-12 * engine.total_mass());

    const Vec3 pm = engine.total_particle_momentum();
    const Vec3 gm = engine.total_grid_momentum();
    CHECK((gm - pm).norm() <= 1e-10 * pm.norm());
}

TEST_CASE("g2p momentum matches the grid when no forces act") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> pos(0.3, 0.9);
    std::uniform_real_distribution<double> vel(0.5, 1.5);
    std::vector<ParticleState> particles;
    for (int i = 0; i < 64; ++i) {
        auto p = particle_at(Vec3(pos(rng), pos(rng), pos(rng)), vel(rng));
        p.v = Vec3(vel(rng), vel(rng), vel(rng));
        particles.push_back(p);
    }
    MpmEngine engine(test_grid(), particles, {elastic_material(1e4, 0.3, 1000)}, quiet_config());
    engine.p2g();
    const Vec3 gm = engine.total_grid_momentum();
    engine.g2p();
    const Vec3 pm = engine.total_particle_momentum();
    CHECK((pm - gm).norm() <= 1e-10 * gm.norm());
}

TEST_CASE("grid_update: no stress, no gravity leaves velocities alone") {
    auto p = particle_at(Vec3(0.5, 0.5, 0.5));
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, quiet_config());
    engine.p2g();
    const auto before = engine.grid().velocity;
    engine.grid_update();
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK((engine.grid().velocity[i] - before[i]).norm() == 0.0);
}

TEST_CASE("grid_update: gravity increments every massive node by dt*g") {
    auto p = particle_at(Vec3(0.5, 0.5, 0.5));
    SimConfig cfg = quiet_config(0.01);
    cfg.gravity = Vec3(0, 0, -9.8);
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, cfg);
    engine.p2g();
    engine.grid_update();
    for (std::size_t i = 0; i < engine.grid().node_count(); ++i) {
        if (engine.grid().mass[i] > 0.0)
            CHECK((engine.grid().velocity[i] - Vec3(0, 0, -0.098)).norm() < 1e-14);
        else
            CHECK(engine.grid().velocity[i].norm() == 0.0);
    }
}

TEST_CASE("grid_update: internal forces of one stretched particle sum to zero") {
    auto p = particle_at(Vec3(0.512, 0.47, 0.55), 1.0, 1e-3);
    p.F_E = Vec3(1.2, 0.95, 1.0).asDiagonal(); // stressed state
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, quiet_config());
    engine.p2g();
    const Vec3 before = engine.total_grid_momentum();
    engine.grid_update();
    const Vec3 after = engine.total_grid_momentum();
    CHECK((after - before).norm() < 1e-9);
}

TEST_CASE("g2p: uniform grid velocity reproduces exactly") {
    auto p = particle_at(Vec3(0.43, 0.55, 0.61));
    p.F_E = Vec3(1.1, 1.0, 0.9).asDiagonal();
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, quiet_config(1e-3));
    engine.p2g();
    const Vec3 vbar(0.3, -0.2, 0.1);
    for (auto& v : engine.grid().velocity) v = vbar;
    const Mat3 f_before = engine.particles()[0].F_E;
    engine.g2p();
    const ParticleState& q = engine.particles()[0];
    CHECK((q.v - vbar).norm() < 1e-14);
    CHECK(q.grad_v.norm() < 1e-12);
    CHECK(q.C.norm() < 1e-12);
    CHECK((q.F_E - f_before).norm() < 1e-13);
    CHECK((q.x - (Vec3(0.43, 0.55, 0.61) + 1e-3 * vbar)).norm() < 1e-15);
}

TEST_CASE("g2p: linear grid velocity recovers its gradient and affine matrix") {
    auto p = particle_at(Vec3(0.47, 0.52, 0.58));
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, quiet_config(1e-5));
    engine.p2g();
    Mat3 G;
    G << 0.2, -0.1, 0.05, 0.3, 0.1, -0.2, 0.0, 0.4, -0.3;
    auto& grid = engine.grid();
    for (int i = 0; i < grid.dims.x(); ++i)
        for (int j = 0; j < grid.dims.y(); ++j)
            for (int k = 0; k < grid.dims.z(); ++k)
                grid.velocity[grid.node_index(i, j, k)] = G * grid.node_position(i, j, k);
    engine.g2p();
    const ParticleState& q = engine.particles()[0];
    CHECK((q.grad_v - G).norm() < 1e-8);
    CHECK((q.C - G).norm() < 1e-8); // APIC C equals the gradient on linear fields
}

TEST_CASE("g2p: materials without plasticity keep the trial update") {
    auto p = particle_at(Vec3(0.5, 0.5, 0.5));
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, quiet_config(1e-3));
    engine.p2g();
    Mat3 G = Mat3::Zero();
    G(0, 0) = 2.0; // pure stretch rate
    auto& grid = engine.grid();
    for (int i = 0; i < grid.dims.x(); ++i)
        for (int j = 0; j < grid.dims.y(); ++j)
            for (int k = 0; k < grid.dims.z(); ++k)
                grid.velocity[grid.node_index(i, j, k)] = G * grid.node_position(i, j, k);
    engine.g2p();
    const ParticleState& q = engine.particles()[0];
    const Mat3 expected = (Mat3::Identity() + 1e-3 * q.grad_v) * Mat3::Identity();
    CHECK((q.F_E - expected).norm() < 1e-12);
}

TEST_CASE("initialize_particles: volumes split the cell") {
    EulerianGrid grid(Vec3::Zero(), 1.0, Vec3i::Constant(8));
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    for (int i = 0; i < 8; ++i) {
        GaussianKernel k;
        k.scale = Vec3::Constant(0.05);
        k.sh = {Vec3::Zero()};
        k.center = Vec3(3.1 + 0.1 * i, 3.5, 3.5); // all inside cell (3,3,3)
        cloud.kernels.push_back(k);
    }
    const std::vector<int> ids(8, 0);
    const std::vector<Material> mats = {elastic_material(1e4, 0.3, 2000)};
    auto particles = initialize_particles(cloud, ids, mats, grid);
    for (const auto& p : particles) {
        CHECK(p.volume0 == doctest::Approx(0.125));
        CHECK(p.mass == doctest::Approx(2000 * 0.125));
        CHECK((p.F_E - Mat3::Identity()).norm() == 0.0);
        CHECK(p.C.norm() == 0.0);
        CHECK(p.v.norm() == 0.0);
    }

    // one per cell
    GaussianCloud sparse;
    sparse.sh_degree = 0;
    for (int i = 0; i < 4; ++i) {
        GaussianKernel k;
        k.scale = Vec3::Constant(0.05);
        k.sh = {Vec3::Zero()};
        k.center = Vec3(2.5 + i, 3.5, 3.5);
        sparse.kernels.push_back(k);
    }
    auto singles = initialize_particles(sparse, std::vector<int>(4, 0), mats, grid);
    double total_volume = 0.0;
    for (const auto& p : singles) {
        CHECK(p.volume0 == doctest::Approx(1.0));
        total_volume += p.volume0;
    }
    CHECK(total_volume == doctest::Approx(4.0)); // occupied cells times cell volume
}

TEST_CASE("initialize_particles rejects out-of-domain centers with indices") {
    EulerianGrid grid(Vec3::Zero(), 1.0, Vec3i::Constant(8));
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    GaussianKernel k;
    k.scale = Vec3::Constant(0.05);
    k.sh = {Vec3::Zero()};
    k.center = Vec3(3.5, 3.5, 3.5);
    cloud.kernels.push_back(k);
    k.center = Vec3(55.0, 3.5, 3.5);
    cloud.kernels.push_back(k);
    try {
        initialize_particles(cloud, {0, 0}, {elastic_material(1e4, 0.3, 1000)}, grid);
        FAIL("expected OutOfDomainError");
    } catch (const OutOfDomainError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
        CHECK(e.particle == 1);
    }
}

TEST_CASE("advance_step: rest state is a fixed point") {
    std::vector<ParticleState> particles;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            particles.push_back(particle_at(Vec3(0.4 + 0.1 * i, 0.4 + 0.1 * j, 0.5), 1.0, 1e-3));
    SimConfig cfg = quiet_config(1e-3);
    MpmEngine engine(test_grid(), particles, {elastic_material(1e4, 0.3, 1000)}, cfg);
    const auto initial = engine.particles();
    for (int s = 0; s < 50; ++s) engine.advance_step();
    for (std::size_t i = 0; i < initial.size(); ++i) {
        CHECK((engine.particles()[i].x - initial[i].x).norm() < 1e-12);
        CHECK(engine.particles()[i].v.norm() < 1e-12);
        CHECK((engine.particles()[i].F_E - Mat3::Identity()).norm() < 1e-12);
    }
}

TEST_CASE("advance_step: rigid translation moves every particle by dt*v per step") {
    std::vector<ParticleState> particles;
    const Vec3 vbar(0.8, -0.5, 0.3);
    for (int i = 0; i < 4; ++i) {
        auto p = particle_at(Vec3(0.35 + 0.05 * i, 0.5, 0.45), 1.0 + 0.2 * i, 1e-3);
        p.v = vbar;
        particles.push_back(p);
    }
    const double dt = 1e-3;
    MpmEngine engine(test_grid(), particles, {elastic_material(1e4, 0.3, 1000)},
                     quiet_config(dt));
    const int steps = 100;
    for (int s = 0; s < steps; ++s) engine.advance_step();
    for (std::size_t i = 0; i < particles.size(); ++i) {
        const Vec3 expected = particles[i].x + steps * dt * vbar;
        CHECK((engine.particles()[i].x - expected).norm() < 1e-10);
        CHECK((engine.particles()[i].v - vbar).norm() < 1e-10);
        CHECK((engine.particles()[i].F_E - Mat3::Identity()).norm() < 1e-10);
    }
}

TEST_CASE("advance_step: gravity-only free fall follows the discrete parabola") {
    std::vector<ParticleState> particles;
    for (int i = 0; i < 8; ++i)
        particles.push_back(
            particle_at(Vec3(0.45 + 0.03 * (i % 2), 0.5 + 0.03 * ((i / 2) % 2), 0.8 + 0.03 * (i / 4)),
                        1.0, 1e-3));
    const double dt = 1e-3;
    const double g = -9.8;
    SimConfig cfg = quiet_config(dt);
    cfg.gravity = Vec3(0, 0, g);
    MpmEngine engine(test_grid(), particles, {elastic_material(1e4, 0.3, 1000)}, cfg);

    double z0 = 0.0;
    for (const auto& p : particles) z0 += p.x.z();
    z0 /= particles.size();

    const int steps = 100;
    for (int s = 0; s < steps; ++s) engine.advance_step();

    double z = 0.0;
    for (const auto& p : engine.particles()) z += p.x.z();
    z /= particles.size();

    // symplectic Euler closed form: z_n = z0 + g dt^2 n(n+1)/2
    const double expected = z0 + g * dt * dt * steps * (steps + 1) / 2.0;
    CHECK(std::abs(z - expected) < 1e-8);
}

TEST_CASE("small-strain bar oscillates near the analytic period") {
    // free-free bar, two cells thick and eight long; nu = 0 gives the 1D
    // wave speed sqrt(E/rho) for the fundamental longitudinal mode
    const double dx = 0.1;
    const EulerianGrid grid(Vec3::Zero(), dx, Vec3i(16, 10, 10));
    const double E = 100.0, rho = 1.0;
    const double c = std::sqrt(E / rho);
    const double L = 8.0 * dx;
    const double x0 = 0.4;

    std::vector<ParticleState> particles;
    const int per_cell = 2; // per axis within the bar
    const double h = dx / per_cell;
    for (int i = 0; i < 8 * per_cell; ++i)
        for (int j = 0; j < 2 * per_cell; ++j)
            for (int k = 0; k < 2 * per_cell; ++k) {
                auto p = particle_at(Vec3(x0 + (i + 0.5) * h, 0.4 + (j + 0.5) * h,
                                          0.4 + (k + 0.5) * h),
                                     rho * h * h * h, h * h * h);
                particles.push_back(p);
            }
    // excite the fundamental free-free mode
    const double v0 = 0.01;
    for (auto& p : particles)
        p.v.x() = v0 * std::cos(M_PI * (p.x.x() - x0) / L);

    const double dt = 1e-4; // c dt / dx = 0.01, far below stability
    MpmEngine engine(grid, particles, {elastic_material(E, 0.0, rho)}, quiet_config(dt));

    auto modal = [&](const MpmEngine& e) {
        double q = 0.0;
        for (std::size_t i = 0; i < e.particles().size(); ++i)
            q += e.particles()[i].mass * e.particles()[i].v.x() *
                 std::cos(M_PI * (particles[i].x.x() - x0) / L);
        return q;
    };

    const double T_analytic = 2.0 * L / c;
    std::vector<double> crossings;
    double prev = modal(engine);
    const int max_steps = static_cast<int>(3.0 * T_analytic / dt);
    for (int s = 1; s <= max_steps && crossings.size() < 5; ++s) {
        engine.advance_step();
        const double cur = modal(engine);
        if (prev > 0.0 && cur <= 0.0) {
            const double frac = prev / (prev - cur);
            crossings.push_back((s - 1 + frac) * dt);
        }
        prev = cur;
    }
    REQUIRE(crossings.size() >= 2);
    const double period = crossings[1] - crossings[0]; // down-crossings are a full period apart
    CHECK(std::abs(period - T_analytic) < 0.10 * T_analytic);
}

TEST_CASE("energy stays bounded through an elastic drop") {
    const double dx = 0.1;
    const EulerianGrid grid(Vec3::Zero(), dx, Vec3i(12, 12, 16));
    const double rho = 1000.0;
    std::vector<ParticleState> particles;
    const double h = dx / 2;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 8; ++k)
                particles.push_back(particle_at(Vec3(0.4 + (i + 0.5) * h, 0.4 + (j + 0.5) * h,
                                                     0.3 + (k + 0.5) * h),
                                                rho * h * h * h, h * h * h));
    SimConfig cfg;
    cfg.dt = 2e-4;
    cfg.gravity = Vec3(0, 0, -9.8);
    cfg.boundary.fill(BoundaryType::Sticky);
    MpmEngine engine(grid, particles, {elastic_material(5e4, 0.3, rho)}, cfg);

    auto total_energy = [&](const MpmEngine& e) {
        double pe = 0.0;
        for (const auto& p : e.particles()) pe += p.mass * 9.8 * p.x.z();
        return e.kinetic_energy() + e.elastic_energy() + pe;
    };

    std::vector<double> energy;
    energy.push_back(total_energy(engine));
    for (int s = 1; s <= 1200; ++s) {
        engine.advance_step();
        if (s % 10 == 0) energy.push_back(total_energy(engine));
    }
    // non-increasing within 1% over every 100-step window
    for (std::size_t i = 10; i < energy.size(); ++i)
        CHECK(energy[i] <= energy[i - 10] * 1.01);
}

TEST_CASE("p2g is bit-identical for a fixed worker count") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> pos(0.3, 0.9);
    std::vector<ParticleState> particles;
    for (int i = 0; i < 200; ++i) {
        auto p = particle_at(Vec3(pos(rng), pos(rng), pos(rng)));
        p.v = Vec3(pos(rng), pos(rng), pos(rng));
        particles.push_back(p);
    }
    auto run = [&](int workers) {
        WorkerGuard guard(workers);
        MpmEngine engine(test_grid(), particles, {elastic_material(1e4, 0.3, 1000)},
                         quiet_config());
        engine.p2g();
        return engine.grid().velocity;
    };
    const auto a = run(2);
    const auto b = run(2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() == 0.0);
}

TEST_CASE("parallel run stays within the determinism budget of the reference") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> pos(0.35, 0.85);
    std::vector<ParticleState> particles;
    for (int i = 0; i < 64; ++i) {
        auto p = particle_at(Vec3(pos(rng), pos(rng), pos(rng)), 1.0, 1e-4);
        p.v = Vec3(0.1, 0.0, -0.1);
        particles.push_back(p);
    }
    auto run = [&](int workers) {
        WorkerGuard guard(workers);
        MpmEngine engine(test_grid(), particles, {elastic_material(1e3, 0.3, 1000)},
                         quiet_config(1e-4));
        for (int s = 0; s < 100; ++s) engine.advance_step();
        return engine.particles();
    };
    const auto reference = run(1);
    const auto parallel = run(2);
    for (std::size_t i = 0; i < reference.size(); ++i)
        CHECK((reference[i].x - parallel[i].x).norm() < 1e-8);
}

TEST_CASE("non-finite stress raises a blowup error carrying step and particle") {
    auto p = particle_at(Vec3(0.5, 0.5, 0.5), 1.0, 1e-3);
    p.F_E = Vec3(1e160, 1.0, 1.0).asDiagonal(); // overflows the stress
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, quiet_config());
    engine.p2g();
    try {
        engine.grid_update();
        FAIL("expected NumericalBlowupError");
    } catch (const NumericalBlowupError& e) {
        CHECK(e.particle == 0);
        CHECK(e.step == 0);
    }
}

TEST_CASE("cfl ratio reflects the largest particle speed") {
    auto p = particle_at(Vec3(0.5, 0.5, 0.5));
    p.v = Vec3(2.0, 0.0, 0.0);
    SimConfig cfg = quiet_config(1e-2);
    MpmEngine engine(test_grid(), {p}, {elastic_material(1e4, 0.3, 1000)}, cfg);
    engine.advance_step();
    CHECK(engine.max_particle_speed() == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(engine.cfl_ratio() == doctest::Approx(2.0 * 1e-2 / 0.1).epsilon(1e-10));
}

} // TEST_SUITE
