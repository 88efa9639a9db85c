#include <doctest.h>

#include <cmath>
#include <array>
#include <limits>
#include <sstream>

#include "apsems/ems_builder.hpp"
#include "apsems/errors.hpp"
#include "apsems/solver.hpp"
#include "support.hpp"

using namespace apsems;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// min c.x over {x in [0, u]^2 : A x <= b} by enumerating every pair of tight
// constraints (rows and bounds). +inf when the polygon is empty.
double vertex_oracle_2d(const std::vector<std::array<double, 2>>& a, const std::vector<double>& b,
                        const std::array<double, 2>& c, double u) {
    std::vector<std::array<double, 3>> lines;  // p x + q y = r, each from some <= constraint
    for (std::size_t i = 0; i < a.size(); ++i) lines.push_back({a[i][0], a[i][1], b[i]});
    lines.push_back({1, 0, 0});
    lines.push_back({1, 0, u});
    lines.push_back({0, 1, 0});
    lines.push_back({0, 1, u});
    double best = kInf;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            const auto& l1 = lines[i];
            const auto& l2 = lines[j];
            const double det = l1[0] * l2[1] - l1[1] * l2[0];
            if (std::abs(det) < 1e-12) continue;
            const double x = (l1[2] * l2[1] - l1[1] * l2[2]) / det;
            const double y = (l1[0] * l2[2] - l1[2] * l2[0]) / det;
            bool ok = x >= -1e-9 && x <= u + 1e-9 && y >= -1e-9 && y <= u + 1e-9;
            for (std::size_t r = 0; ok && r < a.size(); ++r) ok = a[r][0] * x + a[r][1] * y <= b[r] + 1e-9;
            if (ok) best = std::min(best, c[0] * x + c[1] * y);
        }
    }
    return best;
}

MilpModel random_mip(testing::Gen& gen, int n_bin, int n_cont) {
    MilpModel m;
    std::vector<Term> obj;
    for (int j = 0; j < n_bin; ++j) {
        m.add_binary("b" + std::to_string(j));
        obj.push_back({j, gen.uniform(-10.0, 10.0)});
    }
    for (int j = 0; j < n_cont; ++j) {
        const int v = m.add_variable("c" + std::to_string(j), 0.0, gen.uniform(1.0, 10.0));
        obj.push_back({v, gen.uniform(-5.0, 5.0)});
    }
    m.set_objective(obj);
    const int rows = gen.integer(2, 6);
    for (int i = 0; i < rows; ++i) {
        std::vector<Term> t;
        double pos = 0.0;
        for (int j = 0; j < m.num_vars(); ++j) {
            if (!gen.coin(0.6)) continue;
            const double a = gen.uniform(-3.0, 6.0);
            t.push_back({j, a});
            pos += std::max(a, 0.0) * m.variables[static_cast<std::size_t>(j)].upper;
        }
        if (t.empty()) continue;
        const Sense s = gen.coin(0.85) ? Sense::le : Sense::ge;
        const double rhs = s == Sense::le ? gen.uniform(0.1, 0.6) * pos : gen.uniform(0.0, 0.3) * pos;
        m.add_constraint("r" + std::to_string(i), t, s, rhs);
    }
    if (n_bin >= 4 && gen.coin(0.5)) {
        m.add_sos1("s0", {0, 1, 2});
        if (gen.coin()) m.add_constraint("pick", {{0, 1.0}, {1, 1.0}, {2, 1.0}}, Sense::eq, 1.0);
    }
    return m;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("box LP") {
    MilpModel m;
    m.add_variable("x", 0.0, 5.0);
    m.set_objective({{0, 1.0}});
    auto s = solve_lp(m);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.x[0] == 0.0);
    CHECK(s.objective == 0.0);
}

TEST_CASE("simplex edge LP") {
    MilpModel m;
    m.add_variable("x", 0.0, kInf);
    m.add_variable("y", 0.0, kInf);
    m.add_constraint("cap", {{0, 1.0}, {1, 1.0}}, Sense::le, 1.0);
    m.set_objective({{0, -1.0}, {1, -1.0}});
    auto s = solve_lp(m);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == doctest::Approx(-1.0));
    CHECK(s.x[0] + s.x[1] == doctest::Approx(1.0));
    CHECK(vertex_oracle_2d({{1.0, 1.0}}, {1.0}, {-1.0, -1.0}, 10.0) == doctest::Approx(-1.0));
}

TEST_CASE("contradictory rows are infeasible, open directions unbounded") {
    MilpModel m;
    m.add_variable("x", -kInf, kInf);
    m.add_constraint("lo", {{0, 1.0}}, Sense::ge, 2.0);
    m.add_constraint("hi", {{0, 1.0}}, Sense::le, 1.0);
    m.set_objective({{0, 1.0}});
    CHECK(solve_lp(m).status == LpStatus::infeasible);
    CHECK(solve_mip(m).status == MipStatus::infeasible);

    MilpModel u;
    u.add_variable("x", 0.0, kInf);
    u.set_objective({{0, -1.0}});
    CHECK(solve_lp(u).status == LpStatus::unbounded);
}

TEST_CASE("random 2-D LPs agree with vertex enumeration") {
    testing::Gen gen(8);
    for (int trial = 0; trial < 200; ++trial) {
        const double u = gen.uniform(1.0, 10.0);
        const int rows = gen.integer(1, 6);
        std::vector<std::array<double, 2>> a;
        std::vector<double> b;
        MilpModel m;
        m.add_variable("x", 0.0, u);
        m.add_variable("y", 0.0, u);
        for (int i = 0; i < rows; ++i) {
            a.push_back({gen.uniform(-5.0, 5.0), gen.uniform(-5.0, 5.0)});
            b.push_back(gen.uniform(-3.0, 10.0));
            m.add_constraint("r" + std::to_string(i), {{0, a.back()[0]}, {1, a.back()[1]}}, Sense::le, b.back());
        }
        const std::array<double, 2> c = {gen.uniform(-3.0, 3.0), gen.uniform(-3.0, 3.0)};
        m.set_objective({{0, c[0]}, {1, c[1]}});
        const double oracle = vertex_oracle_2d(a, b, c, u);
        const auto s = solve_lp(m);
        if (std::isinf(oracle)) {
            CHECK(s.status == LpStatus::infeasible);
        } else {
            REQUIRE(s.status == LpStatus::optimal);
            CHECK(s.objective == doctest::Approx(oracle).epsilon(1e-7));
            CHECK(m.max_violation(s.x) <= 1e-9);
        }
    }
}

TEST_CASE("all binaries fixed: MIP equals LP") {
    testing::Gen gen(9);
    auto m = random_mip(gen, 6, 3);
    const auto idx = testing::binary_indices(m);
    auto fixed = testing::fix_binaries(m, idx, {1, 0, 0, 1, 0, 1});
    const auto lp = solve_lp(fixed);
    const auto mip = solve_mip(fixed);
    if (lp.status == LpStatus::optimal) {
        REQUIRE(mip.status == MipStatus::optimal);
        CHECK(mip.objective == doctest::Approx(lp.objective).epsilon(1e-9));
    } else {
        CHECK(mip.status == MipStatus::infeasible);
    }
}

TEST_CASE("6-binary knapsack equals exhaustive enumeration") {
    MilpModel m;
    const double value[6] = {10, 13, 7, 8, 12, 4};
    const double weight[6] = {5, 7, 3, 4, 6, 2};
    std::vector<Term> obj, cap;
    for (int j = 0; j < 6; ++j) {
        m.add_binary("item" + std::to_string(j));
        obj.push_back({j, -value[j]});
        cap.push_back({j, weight[j]});
    }
    m.add_constraint("cap", cap, Sense::le, 14.0);
    m.set_objective(obj);

    double best = 0.0;
    for (int mask = 0; mask < 64; ++mask) {
        double w = 0.0, v = 0.0;
        for (int j = 0; j < 6; ++j) {
            if (mask >> j & 1) {
                w += weight[j];
                v += value[j];
            }
        }
        if (w <= 14.0) best = std::max(best, v);
    }
    const auto r = solve_mip(m);
    REQUIRE(r.status == MipStatus::optimal);
    CHECK(r.objective == doctest::Approx(-best));
    CHECK(testing::enumerate_binaries(m) == doctest::Approx(-best));
}

TEST_CASE("integer infeasible with a feasible relaxation") {
    MilpModel m;
    m.add_binary("x1");
    m.add_binary("x2");
    m.add_constraint("half", {{0, 1.0}, {1, 1.0}}, Sense::eq, 1.5);
    m.set_objective({{0, 1.0}});
    CHECK(solve_lp(m).status == LpStatus::optimal);
    CHECK(std::isinf(testing::enumerate_binaries(m)));
    CHECK(solve_mip(m).status == MipStatus::infeasible);
}

TEST_CASE("random MILPs with up to 14 binaries match enumeration") {
    testing::Gen gen(10);
    for (int trial = 0; trial < 40; ++trial) {
        const int n_bin = gen.integer(2, trial < 30 ? 10 : 14);
        auto m = random_mip(gen, n_bin, gen.integer(0, 4));
        const double oracle = testing::enumerate_binaries(m);
        const auto r = solve_mip(m);
        if (std::isinf(oracle)) {
            CHECK(r.status == MipStatus::infeasible);
            continue;
        }
        REQUIRE(r.status == MipStatus::optimal);
        CHECK(testing::rel_close(r.objective, oracle, 1e-6));
        CHECK(r.gap <= 1e-6);
        CHECK(m.max_violation(r.incumbent) <= 1e-6);
        for (int j : testing::binary_indices(m)) {
            const double v = r.incumbent[static_cast<std::size_t>(j)];
            CHECK(std::min(std::abs(v), std::abs(v - 1.0)) <= 1e-6);
        }
        for (const auto& s : m.sos1_sets) {
            int nz = 0;
            for (int j : s.members) nz += std::abs(r.incumbent[static_cast<std::size_t>(j)]) > 1e-6 ? 1 : 0;
            CHECK(nz <= 1);
        }
    }
}

TEST_CASE("global bound is non-decreasing and the search is deterministic") {
    testing::Gen gen(12);
    auto sys = testing::small_system(2, 3, &gen);
    ModelInputs in;
    in.xi = gen.vec(4, 0.2, 0.6);
    for (int i = 0; i < 5; ++i) in.perturbations.push_back(gen.vec(3, 0.0, 0.2));
    in.soc0 = 0.5;
    in.prev_states = {1, 0};
    in.variant = Variant::III;
    auto m = build_model(sys, in);
    const auto a = solve_mip(m);
    const auto b = solve_mip(m);
    REQUIRE(a.status == MipStatus::optimal);
    for (std::size_t i = 1; i < a.bound_trace.size(); ++i) CHECK(a.bound_trace[i] >= a.bound_trace[i - 1] - 1e-9);
    CHECK(a.nodes == b.nodes);
    CHECK(a.incumbent == b.incumbent);
    CHECK(a.objective == b.objective);

    for (int trial = 0; trial < 10; ++trial) {
        auto r = random_mip(gen, 12, 3);
        const auto s = solve_mip(r);
        for (std::size_t i = 1; i < s.bound_trace.size(); ++i) CHECK(s.bound_trace[i] >= s.bound_trace[i - 1] - 1e-9);
    }
}

TEST_CASE("node limit reports limit status") {
    testing::Gen gen(14);
    MilpModel m;
    std::vector<Term> obj, cap;
    for (int j = 0; j < 30; ++j) {
        m.add_binary("x" + std::to_string(j));
        const double w = gen.uniform(1.0, 10.0);
        obj.push_back({j, -(w + gen.uniform(-0.5, 0.5))});
        cap.push_back({j, w});
    }
    m.add_constraint("cap", cap, Sense::le, 47.3);
    m.set_objective(obj);
    MipLimits lim;
    lim.max_nodes = 3;
    const auto r = solve_mip(m, lim);
    CHECK(r.status == MipStatus::limit);
    CHECK(r.nodes <= 3);
    if (r.has_incumbent()) CHECK(r.gap >= 0.0);
}

TEST_CASE("MPS write -> read -> write is byte-identical") {
    testing::Gen gen(15);
    auto sys = testing::small_system(2, 3);
    ModelInputs in;
    in.xi = {0.3, 0.4, 0.5, 0.4};
    in.perturbations = {{0.1, 0.05, 0.2}, {0.0, 0.3, 0.1}};
    in.soc0 = 0.5;
    in.prev_states = {1, 0};
    in.variant = Variant::III;
    const std::vector<MilpModel> models = {build_model(sys, in), random_mip(gen, 8, 3)};
    for (const auto& model : models) {
        const MilpModel* m = &model;
        std::ostringstream first;
        write_mps(*m, first);
        std::istringstream src(first.str());
        const auto back = read_mps(src);
        std::ostringstream second;
        write_mps(back, second);
        CHECK(first.str() == second.str());

        REQUIRE(back.num_vars() == m->num_vars());
        REQUIRE(back.num_rows() == m->num_rows());
        for (int i = 0; i < m->num_rows(); ++i) {
            const auto& a = m->constraints[static_cast<std::size_t>(i)];
            const auto& b = back.constraints[static_cast<std::size_t>(i)];
            CHECK(a.name == b.name);
            CHECK(a.sense == b.sense);
            CHECK(std::abs(a.rhs - b.rhs) <= 1e-12);
            REQUIRE(a.terms.size() == b.terms.size());
        }
        CHECK(back.sos1_sets.size() == m->sos1_sets.size());
        CHECK(solve_mip(back).objective == doctest::Approx(solve_mip(*m).objective).epsilon(1e-9));
    }
}

TEST_CASE("hand-written MPS parses to the expected model") {
    std::istringstream src(
        "NAME tiny\n"
        "ROWS\n"
        " N cost\n"
        " L cap\n"
        " G floor\n"
        "COLUMNS\n"
        "    x cost 1.5 cap 1\n"
        "    MARKER 'MARKER' 'INTORG'\n"
        "    y cost -2 cap 1\n"
        "    y floor 1\n"
        "    MARKER 'MARKER' 'INTEND'\n"
        "RHS\n"
        "    RHS cap 4 floor 0.5\n"
        "BOUNDS\n"
        " UP BND x 3\n"
        "ENDATA\n");
    const auto m = read_mps(src);
    CHECK(m.name == "tiny");
    REQUIRE(m.num_vars() == 2);
    CHECK(m.variables[0].name == "x");
    CHECK(m.variables[0].type == VarType::continuous);
    CHECK(m.variables[0].upper == 3.0);
    CHECK(m.variables[1].type == VarType::binary);
    REQUIRE(m.num_rows() == 2);
    CHECK(m.constraints[0].sense == Sense::le);
    CHECK(m.constraints[0].rhs == 4.0);
    CHECK(m.constraints[1].sense == Sense::ge);
    CHECK(m.constraints[1].rhs == 0.5);
    CHECK(m.objective == std::vector<Term>{{0, 1.5}, {1, -2.0}});
    const auto r = solve_mip(m);
    REQUIRE(r.status == MipStatus::optimal);
    CHECK(r.objective == doctest::Approx(-2.0));
}

TEST_CASE("malformed MPS reports the line") {
    std::istringstream bad("NAME t\nROWS\n N obj\nCOLUMNZ\n");
    try {
        read_mps(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
    std::istringstream no_end("NAME t\nROWS\n N obj\n");
    CHECK_THROWS_AS(read_mps(no_end), ParseError);
    std::istringstream bad_num("NAME t\nROWS\n N obj\nCOLUMNS\n    x obj abc\nENDATA\n");
    try {
        read_mps(bad_num);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 5);
    }
}

}  // TEST_SUITE
