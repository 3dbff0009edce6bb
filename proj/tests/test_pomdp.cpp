#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qmdpnet/domains.hpp"
#include "qmdpnet/errors.hpp"
#include "qmdpnet/pomdp.hpp"
#include "qmdpnet/pomdp_file.hpp"
#include "qmdpnet/rng.hpp"

using namespace qmdpnet;

namespace {

// little 3-state slip chain with a noisy at-the-end bit
TabularPomdp chain_model() {
    TabularPomdp m(3, 1, 2);
    m.add_t(0, 0, 0, 0.2);
    m.add_t(0, 0, 1, 0.8);
    m.add_t(0, 1, 1, 0.2);
    m.add_t(0, 1, 2, 0.8);
    m.add_t(0, 2, 2, 1.0);
    for (int s = 0; s < 3; ++s) {
        double p_one = s == 2 ? 0.9 : 0.1;
        m.z(0, s, 1) = p_one;
        m.z(0, s, 0) = 1.0 - p_one;
    }
    m.gamma = 0.95;
    m.finalize();
    return m;
}

TabularPomdp random_model(int ns, int na, int no, std::uint64_t seed) {
    Rng rng(seed);
    TabularPomdp m(ns, na, no);
    for (int a = 0; a < na; ++a)
        for (int s = 0; s < ns; ++s) {
            std::vector<double> row(static_cast<std::size_t>(ns));
            double total = 0.0;
            for (double& v : row) {
                v = rng.next_double() + 0.01;
                total += v;
            }
            for (int s2 = 0; s2 < ns; ++s2)
                m.add_t(a, s, s2, row[static_cast<std::size_t>(s2)] / total);
            double ztotal = 0.0;
            std::vector<double> zrow(static_cast<std::size_t>(no));
            for (double& v : zrow) {
                v = rng.next_double() + 0.01;
                ztotal += v;
            }
            for (int o = 0; o < no; ++o) m.z(a, s, o) = zrow[static_cast<std::size_t>(o)] / ztotal;
            m.r(s, a) = rng.next_range(-1.0, 1.0);
        }
    m.gamma = 0.95;
    m.finalize();
    return m;
}

// independent straightforward dense dynamic-programming re-implementation
QTable naive_value_iteration(const TabularPomdp& m, int iters) {
    const int ns = m.n_states(), na = m.n_actions();
    std::vector<double> v(static_cast<std::size_t>(ns), 0.0);
    QTable q;
    q.n_states = ns;
    q.n_actions = na;
    q.q.assign(static_cast<std::size_t>(ns) * na, 0.0);
    for (int k = 0; k < iters; ++k) {
        std::vector<double> v2(static_cast<std::size_t>(ns), 0.0);
        for (int s = 0; s < ns; ++s) {
            double best = -1e300;
            for (int a = 0; a < na; ++a) {
                double acc = 0.0;
                for (int s2 = 0; s2 < ns; ++s2)
                    acc += m.t(a, s, s2) * v[static_cast<std::size_t>(s2)];
                q.at(s, a) = m.r(s, a) + m.gamma * acc;
                best = std::max(best, q.at(s, a));
            }
            v2[static_cast<std::size_t>(s)] = best;
        }
        v = v2;
    }
    return q;
}

}  // namespace

TEST_CASE("exact filter: deterministic transition with a perfect sensor") {
    TabularPomdp m(2, 1, 2);
    m.add_t(0, 0, 1, 1.0);
    m.add_t(0, 1, 0, 1.0);
    m.z(0, 0, 0) = 1.0;
    m.z(0, 1, 1) = 1.0;
    m.finalize();
    Belief prior{1.0, 0.0};
    Belief post = exact_filter_step(m, prior, 0, 1);
    CHECK(post[0] == 0.0);
    CHECK(post[1] == 1.0);
    // contradicting observation has no support
    CHECK_THROWS_AS(exact_filter_step(m, prior, 0, 0), DegenerateBeliefError);
}

TEST_CASE("exact filter: uninformative sensor and doubly stochastic motion keep uniform") {
    TabularPomdp m(3, 1, 2);
    for (int s = 0; s < 3; ++s) {
        for (int s2 = 0; s2 < 3; ++s2) m.add_t(0, s, s2, 1.0 / 3.0);
        m.z(0, s, 0) = 0.5;
        m.z(0, s, 1) = 0.5;
    }
    m.finalize();
    Belief uniform{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    Belief post = exact_filter_step(m, uniform, 0, 1);
    for (double p : post) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("exact filter matches the hand-computed slip-chain Bayes table") {
    TabularPomdp m = chain_model();
    Belief prior{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    Belief post = exact_filter_step(m, prior, 0, 1);
    // enumerating the joint by hand: prediction (0.2/3, 1/3, 0.6), correction
    // by (0.1, 0.1, 0.9) gives exactly (1, 5, 81)/87
    CHECK(post[0] == doctest::Approx(1.0 / 87.0).epsilon(1e-12));
    CHECK(post[1] == doctest::Approx(5.0 / 87.0).epsilon(1e-12));
    CHECK(post[2] == doctest::Approx(81.0 / 87.0).epsilon(1e-12));

    // brute-force oracle over random beliefs and both observations
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Belief b(3);
        double total = 0.0;
        for (double& v : b) {
            v = rng.next_double() + 0.01;
            total += v;
        }
        for (double& v : b) v /= total;
        int obs = rng.next_int(2);
        Belief mine = exact_filter_step(m, b, 0, obs);
        Belief oracle(3, 0.0);
        double mass = 0.0;
        for (int s2 = 0; s2 < 3; ++s2) {
            for (int s = 0; s < 3; ++s) oracle[s2] += m.t(0, s, s2) * b[s];
            oracle[s2] *= m.z(0, s2, obs);
            mass += oracle[s2];
        }
        double post_total = 0.0;
        for (int s2 = 0; s2 < 3; ++s2) {
            CHECK(mine[s2] == doctest::Approx(oracle[s2] / mass).epsilon(1e-12));
            CHECK(mine[s2] >= 0.0);
            post_total += mine[s2];
        }
        CHECK(post_total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("value iteration: geometric series on a self-loop") {
    TabularPomdp m(1, 1, 1);
    m.add_t(0, 0, 0, 1.0);
    m.z(0, 0, 0) = 1.0;
    m.r(0, 0) = 1.0;
    m.gamma = 0.5;
    m.finalize();
    ViResult vi = value_iteration(m, {200, 1e-12});
    CHECK(vi.q.at(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("value iteration: absorbing goal with zero reward keeps V(goal)=0") {
    for (double gamma : {0.5, 0.9, 0.99}) {
        TabularPomdp m(2, 1, 1);
        m.add_t(0, 0, 1, 1.0);
        m.add_t(0, 1, 1, 1.0);
        m.z(0, 0, 0) = 1.0;
        m.z(0, 1, 0) = 1.0;
        m.r(0, 0) = 5.0;
        m.terminal[1] = 1;
        m.gamma = gamma;
        m.finalize();
        ViResult vi = value_iteration(m);
        CHECK(vi.q.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(vi.q.at(0, 0) == doctest::Approx(5.0).epsilon(1e-9));
    }
}

TEST_CASE("value iteration matches an independent re-implementation") {
    TabularPomdp m = random_model(6, 3, 4, 99);
    ViResult mine = value_iteration(m, {400, 0.0});
    QTable oracle = naive_value_iteration(m, 400);
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 3; ++a)
            CHECK(mine.q.at(s, a) == doctest::Approx(oracle.at(s, a)).epsilon(1e-9));
}

TEST_CASE("value iteration contracts at rate gamma") {
    TabularPomdp m = random_model(8, 2, 3, 123);
    auto v_of = [&](const QTable& q) {
        std::vector<double> v(8);
        for (int s = 0; s < 8; ++s) {
            double best = -1e300;
            for (int a = 0; a < 2; ++a) best = std::max(best, q.at(s, a));
            v[static_cast<std::size_t>(s)] = best;
        }
        return v;
    };
    std::vector<std::vector<double>> vs;
    for (int k = 1; k <= 12; ++k) vs.push_back(v_of(value_iteration(m, {k, 0.0}).q));
    for (std::size_t k = 2; k < vs.size(); ++k) {
        double d_now = 0.0, d_prev = 0.0;
        for (int s = 0; s < 8; ++s) {
            d_now = std::max(d_now, std::fabs(vs[k][static_cast<std::size_t>(s)] -
                                              vs[k - 1][static_cast<std::size_t>(s)]));
            d_prev = std::max(d_prev, std::fabs(vs[k - 1][static_cast<std::size_t>(s)] -
                                                vs[k - 2][static_cast<std::size_t>(s)]));
        }
        CHECK(d_now <= m.gamma * d_prev + 1e-12);
    }
}

TEST_CASE("qmdp action selection") {
    QTable q;
    q.n_states = 3;
    q.n_actions = 2;
    q.q = {1.0, 0.0, 0.0, 2.0, 0.5, 0.5};

    Belief delta{1.0, 0.0, 0.0};
    CHECK(qmdp_action(q, delta) == 0);  // the MDP-optimal action at state 0
    Belief delta1{0.0, 1.0, 0.0};
    CHECK(qmdp_action(q, delta1) == 1);

    Belief tie{0.0, 0.0, 1.0};
    CHECK(qmdp_action(q, tie) == 0);  // exact tie resolves to the lowest index

    // invariance under positive rescaling of the belief vector
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        Belief b(3);
        for (double& v : b) v = rng.next_double();
        Belief scaled = b;
        for (double& v : scaled) v *= 7.5;
        CHECK(greedy_argmax(qmdp_scores(q, b), 1e-12) ==
              greedy_argmax(qmdp_scores(q, scaled), 1e-12));
    }
}

TEST_CASE("qmdp scores are the belief-weighted Q columns") {
    TabularPomdp m = random_model(5, 3, 2, 17);
    ViResult vi = value_iteration(m);
    Rng rng(9);
    Belief b(5);
    double total = 0.0;
    for (double& v : b) {
        v = rng.next_double();
        total += v;
    }
    for (double& v : b) v /= total;
    auto scores = qmdp_scores(vi.q, b);
    for (int a = 0; a < 3; ++a) {
        double acc = 0.0;
        for (int s = 0; s < 5; ++s) acc += vi.q.at(s, a) * b[static_cast<std::size_t>(s)];
        CHECK(scores[static_cast<std::size_t>(a)] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("discounted_return") {
    CHECK(discounted_return({1.0}, 0.3) == 1.0);
    CHECK(discounted_return(std::vector<double>(10, 1.0), 0.5) ==
          doctest::Approx(2.0 * (1.0 - std::pow(0.5, 10))).epsilon(1e-12));
    CHECK(discounted_return({}, 0.9) == 0.0);
}

TEST_CASE("pomdp parser: minimal file") {
    TabularPomdp m = parse_pomdp_text(
        "discount: 0.9\nvalues: reward\nstates: 1\nactions: 1\nobservations: 1\n"
        "T: 0 : 0 : 0 1.0\nO: 0 : 0 : 0 1.0\n");
    CHECK(m.n_states() == 1);
    CHECK(m.n_actions() == 1);
    CHECK(m.n_obs() == 1);
    CHECK(m.t(0, 0, 0) == 1.0);
    CHECK(m.z(0, 0, 0) == 1.0);
}

TEST_CASE("pomdp parser: identity and uniform keywords, named ids") {
    TabularPomdp m = parse_pomdp_text(
        "discount: 0.95\nvalues: reward\nstates: left right\nactions: go stay\n"
        "observations: 2\n"
        "T: go\n0 1\n1 0\nT: stay identity\nO: * uniform\n"
        "R: go : left : right : * 3.5\n");
    CHECK(m.t(0, 0, 1) == 1.0);
    CHECK(m.t(1, 0, 0) == 1.0);
    CHECK(m.t(1, 1, 1) == 1.0);
    CHECK(m.z(0, 0, 0) == 0.5);
    CHECK(m.r(0, 0) == doctest::Approx(3.5));  // expected immediate reward
    CHECK(m.r(1, 0) == 0.0);
}

TEST_CASE("pomdp parser: unspecified rows default to identity/uniform/zero") {
    TabularPomdp m = parse_pomdp_text(
        "discount: 0.9\nvalues: reward\nstates: 3\nactions: 2\nobservations: 2\n"
        "T: 0 : 0 : 1 1.0\n");
    CHECK(m.t(0, 1, 1) == 1.0);
    CHECK(m.t(1, 2, 2) == 1.0);
    CHECK(m.z(1, 0, 1) == 0.5);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) CHECK(m.r(s, a) == 0.0);
}

TEST_CASE("pomdp parser: errors carry line numbers; bad rows rejected") {
    try {
        parse_pomdp_text("discount: 0.9\nvalues: reward\nstates: 2\nactions: 1\n"
                         "observations: 1\nT: 0 : zzz : 0 1.0\n");
        FAIL("expected a parse error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 6") != std::string::npos);
    }
    CHECK_THROWS_AS(
        parse_pomdp_text("discount: 0.9\nvalues: reward\nstates: 2\nactions: 1\n"
                         "observations: 1\nT: 0 : 0\n0.5 0.4\n"),
        FormatError);  // row sums to 0.9, outside the 1e-6 normalization band
}

TEST_CASE("pomdp parser: cost files negate into rewards") {
    TabularPomdp m = parse_pomdp_text(
        "discount: 0.9\nvalues: cost\nstates: 1\nactions: 1\nobservations: 1\n"
        "T: 0 identity\nO: 0 uniform\nR: 0 : 0 : * : * 2.0\n");
    CHECK(m.r(0, 0) == doctest::Approx(-2.0));
}

TEST_CASE("pomdp writer round-trip reproduces the tensors exactly") {
    TabularPomdp m = hallway2_reconstruction();
    TabularPomdp again = parse_pomdp_text(write_pomdp_text(m));
    REQUIRE(again.n_states() == m.n_states());
    REQUIRE(again.n_actions() == m.n_actions());
    REQUIRE(again.n_obs() == m.n_obs());
    CHECK(again.gamma == m.gamma);
    for (int a = 0; a < m.n_actions(); ++a)
        for (int s = 0; s < m.n_states(); ++s) {
            for (int s2 = 0; s2 < m.n_states(); ++s2) CHECK(again.t(a, s, s2) == m.t(a, s, s2));
            for (int o = 0; o < m.n_obs(); ++o) CHECK(again.z(a, s, o) == m.z(a, s, o));
            CHECK(again.r(s, a) == doctest::Approx(m.r(s, a)).epsilon(1e-12));
        }
    CHECK(again.start == m.start);
    CHECK(again.terminal == m.terminal);
}

TEST_CASE("shipped hallway benchmark parses to the expected sizes") {
    TabularPomdp m = parse_pomdp_file(std::string(QMDPNET_DATA_DIR) + "/hallway2.pomdp");
    CHECK(m.n_states() == 92);
    CHECK(m.n_actions() == 5);
    CHECK(m.n_obs() == 17);
    int terminals = 0;
    for (int s = 0; s < m.n_states(); ++s) terminals += m.is_terminal(s) ? 1 : 0;
    CHECK(terminals == 4);  // one goal room, four headings
    double sum = 0.0;
    for (int s2 = 0; s2 < m.n_states(); ++s2) sum += m.t(1, 5, s2);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("model invariants are enforced") {
    TabularPomdp bad(2, 1, 1);
    bad.add_t(0, 0, 0, 0.7);  // row sums to 0.7
    bad.add_t(0, 1, 1, 1.0);
    bad.z(0, 0, 0) = 1.0;
    bad.z(0, 1, 0) = 1.0;
    CHECK_THROWS_AS(bad.finalize(), std::invalid_argument);

    TabularPomdp bad2(2, 1, 1);
    bad2.add_t(0, 0, 1, 1.0);
    bad2.add_t(0, 1, 1, 1.0);
    bad2.z(0, 0, 0) = 1.0;
    bad2.z(0, 1, 0) = 1.0;
    bad2.terminal[0] = 1;  // terminal state that does not self-loop
    CHECK_THROWS_AS(bad2.finalize(), std::invalid_argument);
}
