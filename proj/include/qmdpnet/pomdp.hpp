#ifndef QMDPNET_POMDP_HPP
#define QMDPNET_POMDP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qmdpnet/rng.hpp"

namespace qmdpnet {

using Belief = std::vector<double>;

// nS x nA action values, S-major.
struct QTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> q;

    double at(int s, int a) const { return q[static_cast<std::size_t>(s * n_actions + a)]; }
    double& at(int s, int a) { return q[static_cast<std::size_t>(s * n_actions + a)]; }
};

// Explicit tabular POMDP (S, A, O, T, Z, R, gamma). The nA x nS x nS
// transition table is held as sparse rows (column views are built by
// finalize() for the filter); Z and R are dense. Immutable after finalize;
// safe to share across threads.
class TabularPomdp {
public:
    struct Entry {
        int index;
        double p;
    };

    TabularPomdp() = default;
    TabularPomdp(int n_states, int n_actions, int n_obs);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int n_obs() const { return n_obs_; }

    // accumulates probability mass; duplicates merge at finalize()
    void add_t(int a, int s, int s2, double p);
    double t(int a, int s, int s2) const;

    double z(int a, int s2, int o) const { return z_[flat2(a, s2, o, n_obs_)]; }
    double& z(int a, int s2, int o) { return z_[flat2(a, s2, o, n_obs_)]; }
    double r(int s, int a) const { return r_[static_cast<std::size_t>(s * n_actions_ + a)]; }
    double& r(int s, int a) { return r_[static_cast<std::size_t>(s * n_actions_ + a)]; }

    double gamma = 0.99;
    std::vector<std::uint8_t> terminal;  // absorbing goal mask, size nS
    std::vector<double> start;           // initial-state distribution; empty = uniform

    bool is_terminal(int s) const { return terminal[static_cast<std::size_t>(s)] != 0; }

    // Validates row normalization (1e-9), terminal self-loops and gamma, then
    // builds the sparse views. Must be called once after the tables are filled.
    void finalize();
    bool finalized() const { return finalized_; }

    const std::vector<Entry>& t_row(int a, int s) const {
        return t_rows_[static_cast<std::size_t>(a * n_states_ + s)];
    }
    const std::vector<Entry>& t_col(int a, int s2) const {
        return t_cols_[static_cast<std::size_t>(a * n_states_ + s2)];
    }
    const std::vector<Entry>& z_row(int a, int s2) const {
        return z_rows_[static_cast<std::size_t>(a * n_states_ + s2)];
    }

    Belief start_belief() const;
    int sample_start(Rng& rng) const;
    int sample_next_state(int s, int a, Rng& rng) const;
    int sample_observation(int a, int s2, Rng& rng) const;

private:
    // (a, s|s2, inner-index) -> flat offset; middle extent is always nS.
    std::size_t flat2(int a, int mid, int k, int inner) const {
        return (static_cast<std::size_t>(a) * static_cast<std::size_t>(n_states_) +
                static_cast<std::size_t>(mid)) *
                   static_cast<std::size_t>(inner) +
               static_cast<std::size_t>(k);
    }

    int n_states_ = 0, n_actions_ = 0, n_obs_ = 0;
    std::vector<double> z_;  // nA x nS x nO
    std::vector<double> r_;  // nS x nA
    bool finalized_ = false;
    std::vector<std::vector<Entry>> t_rows_, t_cols_, z_rows_;
};

// One Bayes step: b'(s') ~ Z[a][s'][o] * sum_s T[a][s][s'] * b(s), renormalized.
// Throws DegenerateBeliefError when the posterior mass is below 1e-12
// (impossible observation); recovery is the caller's decision.
Belief exact_filter_step(const TabularPomdp& model, const Belief& belief, int action,
                         int observation);

// Correction-only update b(s) ~ Z[a][s][o] * b(s); the reset step of domains
// whose action set has no stay action.
Belief bayes_correct(const TabularPomdp& model, const Belief& belief, int action,
                     int observation);

struct ViOptions {
    int max_iters = 0;     // 0 = derive from model size (2 * nS)
    double tol = 1e-6;     // sup-norm stopping threshold
};

struct ViResult {
    QTable q;
    int iters = 0;
    double last_delta = 0.0;
};

// Bellman iteration Q_{k+1}(s,a) = R(s,a) + gamma * sum_s' T(s,a,s') max_a' Q_k(s',a'),
// V_0 = 0; stops at the tolerance or the iteration cap, whichever first.
ViResult value_iteration(const TabularPomdp& model, ViOptions opts = {});

std::vector<double> qmdp_scores(const QTable& q, const Belief& belief);
// argmax of qmdp_scores with ties resolved to the lowest action index.
int qmdp_action(const QTable& q, const Belief& belief);

double discounted_return(const std::vector<double>& rewards, double gamma);

// Shared greedy argmax: lowest index wins among scores within `tie_eps`
// of the maximum, so independently computed score vectors that tie
// mathematically resolve identically despite rounding.
int greedy_argmax(const std::vector<double>& scores, double tie_eps = 1e-7);

void validate_belief(const Belief& b, double tol = 1e-9);

}  // namespace qmdpnet

#endif
