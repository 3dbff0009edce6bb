#include "qmdpnet/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qmdpnet/errors.hpp"

namespace qmdpnet {

TabularPomdp::TabularPomdp(int n_states, int n_actions, int n_obs)
    : n_states_(n_states), n_actions_(n_actions), n_obs_(n_obs) {
    if (n_states <= 0 || n_actions <= 0 || n_obs <= 0)
        throw std::invalid_argument("TabularPomdp: counts must be positive");
    t_rows_.assign(static_cast<std::size_t>(n_actions) * n_states, {});
    z_.assign(static_cast<std::size_t>(n_actions) * n_states * n_obs, 0.0);
    r_.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    terminal.assign(static_cast<std::size_t>(n_states), 0);
}

void TabularPomdp::add_t(int a, int s, int s2, double p) {
    if (p == 0.0) return;
    t_rows_[static_cast<std::size_t>(a * n_states_ + s)].push_back({s2, p});
}

double TabularPomdp::t(int a, int s, int s2) const {
    double acc = 0.0;
    for (const Entry& e : t_rows_[static_cast<std::size_t>(a * n_states_ + s)])
        if (e.index == s2) acc += e.p;
    return acc;
}

void TabularPomdp::finalize() {
    if (gamma <= 0.0 || gamma > 1.0)
        throw std::invalid_argument("TabularPomdp: gamma must be in (0,1]");
    t_cols_.assign(static_cast<std::size_t>(n_actions_) * n_states_, {});
    z_rows_.assign(static_cast<std::size_t>(n_actions_) * n_states_, {});

    for (int a = 0; a < n_actions_; ++a) {
        for (int s = 0; s < n_states_; ++s) {
            auto& row = t_rows_[static_cast<std::size_t>(a * n_states_ + s)];
            std::sort(row.begin(), row.end(),
                      [](const Entry& x, const Entry& y) { return x.index < y.index; });
            std::vector<Entry> merged;
            for (const Entry& e : row) {
                if (e.p < 0.0) throw std::invalid_argument("TabularPomdp: negative T entry");
                if (!merged.empty() && merged.back().index == e.index)
                    merged.back().p += e.p;
                else
                    merged.push_back(e);
            }
            row = std::move(merged);
            double row_sum = 0.0;
            for (const Entry& e : row) row_sum += e.p;
            if (std::fabs(row_sum - 1.0) > 1e-9)
                throw std::invalid_argument("TabularPomdp: T row does not sum to 1 (a=" +
                                            std::to_string(a) + ", s=" + std::to_string(s) + ")");
            for (const Entry& e : row)
                t_cols_[static_cast<std::size_t>(a * n_states_ + e.index)].push_back({s, e.p});
            if (terminal[static_cast<std::size_t>(s)] && std::fabs(t(a, s, s) - 1.0) > 1e-12)
                throw std::invalid_argument("TabularPomdp: terminal state must self-loop");
            double z_sum = 0.0;
            for (int o = 0; o < n_obs_; ++o) {
                double p = z(a, s, o);
                if (p < 0.0) throw std::invalid_argument("TabularPomdp: negative Z entry");
                z_sum += p;
                if (p > 0.0)
                    z_rows_[static_cast<std::size_t>(a * n_states_ + s)].push_back({o, p});
            }
            if (std::fabs(z_sum - 1.0) > 1e-9)
                throw std::invalid_argument("TabularPomdp: Z row does not sum to 1 (a=" +
                                            std::to_string(a) + ", s'=" + std::to_string(s) + ")");
        }
    }
    if (!start.empty()) {
        if (static_cast<int>(start.size()) != n_states_)
            throw std::invalid_argument("TabularPomdp: start distribution size mismatch");
        double s = 0.0;
        for (double p : start) {
            if (p < 0.0) throw std::invalid_argument("TabularPomdp: negative start entry");
            s += p;
        }
        if (std::fabs(s - 1.0) > 1e-9)
            throw std::invalid_argument("TabularPomdp: start distribution does not sum to 1");
    }
    finalized_ = true;
}

Belief TabularPomdp::start_belief() const {
    if (!start.empty()) return start;
    return Belief(static_cast<std::size_t>(n_states_), 1.0 / n_states_);
}

namespace {
int sample_from(const std::vector<TabularPomdp::Entry>& entries, Rng& rng) {
    double u = rng.next_double();
    double acc = 0.0;
    for (const auto& e : entries) {
        acc += e.p;
        if (u < acc) return e.index;
    }
    return entries.back().index;
}
}  // namespace

int TabularPomdp::sample_start(Rng& rng) const {
    Belief b = start_belief();
    double u = rng.next_double();
    double acc = 0.0;
    for (int s = 0; s < n_states_; ++s) {
        acc += b[static_cast<std::size_t>(s)];
        if (u < acc) return s;
    }
    return n_states_ - 1;
}

int TabularPomdp::sample_next_state(int s, int a, Rng& rng) const {
    return sample_from(t_row(a, s), rng);
}

int TabularPomdp::sample_observation(int a, int s2, Rng& rng) const {
    return sample_from(z_row(a, s2), rng);
}

void validate_belief(const Belief& b, double tol) {
    double total = 0.0;
    for (double p : b) {
        if (p < 0.0) throw std::invalid_argument("belief: negative entry");
        total += p;
    }
    if (std::fabs(total - 1.0) > tol)
        throw std::invalid_argument("belief: does not sum to 1");
}

Belief exact_filter_step(const TabularPomdp& model, const Belief& belief, int action,
                         int observation) {
    if (action < 0 || action >= model.n_actions())
        throw std::invalid_argument("exact_filter_step: invalid action");
    if (observation < 0 || observation >= model.n_obs())
        throw std::invalid_argument("exact_filter_step: invalid observation");
    if (static_cast<int>(belief.size()) != model.n_states())
        throw std::invalid_argument("exact_filter_step: belief size mismatch");

    const int n = model.n_states();
    Belief out(static_cast<std::size_t>(n), 0.0);
    double total = 0.0;
    for (int s2 = 0; s2 < n; ++s2) {
        const double zs = model.z(action, s2, observation);
        if (zs == 0.0) continue;
        double pred = 0.0;
        for (const auto& e : model.t_col(action, s2))
            pred += e.p * belief[static_cast<std::size_t>(e.index)];
        const double v = zs * pred;
        out[static_cast<std::size_t>(s2)] = v;
        total += v;
    }
    if (total < 1e-12)
        throw DegenerateBeliefError("exact_filter_step: impossible observation (posterior mass " +
                                    std::to_string(total) + ")");
    for (double& v : out) v /= total;
    return out;
}

Belief bayes_correct(const TabularPomdp& model, const Belief& belief, int action,
                     int observation) {
    if (static_cast<int>(belief.size()) != model.n_states())
        throw std::invalid_argument("bayes_correct: belief size mismatch");
    Belief out(belief.size(), 0.0);
    double total = 0.0;
    for (int s = 0; s < model.n_states(); ++s) {
        const double v = belief[static_cast<std::size_t>(s)] * model.z(action, s, observation);
        out[static_cast<std::size_t>(s)] = v;
        total += v;
    }
    if (total < 1e-12) throw DegenerateBeliefError("bayes_correct: impossible observation");
    for (double& v : out) v /= total;
    return out;
}

ViResult value_iteration(const TabularPomdp& model, ViOptions opts) {
    const int ns = model.n_states(), na = model.n_actions();
    if (model.gamma >= 1.0 && opts.max_iters == 0 && opts.tol <= 0.0)
        throw std::invalid_argument("value_iteration: gamma = 1 requires an iteration cap");
    const int cap = opts.max_iters > 0 ? opts.max_iters : 2 * ns;

    ViResult res;
    res.q.n_states = ns;
    res.q.n_actions = na;
    res.q.q.assign(static_cast<std::size_t>(ns) * na, 0.0);

    std::vector<double> v(static_cast<std::size_t>(ns), 0.0);
    std::vector<double> v_next(static_cast<std::size_t>(ns), 0.0);
    for (int k = 0; k < cap; ++k) {
        double delta = 0.0;
        for (int s = 0; s < ns; ++s) {
            double best = -INFINITY;
            for (int a = 0; a < na; ++a) {
                double exp_v = 0.0;
                for (const auto& e : model.t_row(a, s))
                    exp_v += e.p * v[static_cast<std::size_t>(e.index)];
                const double q = model.r(s, a) + model.gamma * exp_v;
                res.q.at(s, a) = q;
                best = std::max(best, q);
            }
            v_next[static_cast<std::size_t>(s)] = best;
            delta = std::max(delta, std::fabs(best - v[static_cast<std::size_t>(s)]));
        }
        std::swap(v, v_next);
        res.iters = k + 1;
        res.last_delta = delta;
        if (opts.tol > 0.0 && delta < opts.tol) break;
    }
    return res;
}

std::vector<double> qmdp_scores(const QTable& q, const Belief& belief) {
    if (static_cast<int>(belief.size()) != q.n_states)
        throw std::invalid_argument("qmdp_scores: belief size mismatch");
    std::vector<double> scores(static_cast<std::size_t>(q.n_actions), 0.0);
    for (int s = 0; s < q.n_states; ++s) {
        const double b = belief[static_cast<std::size_t>(s)];
        if (b == 0.0) continue;
        const double* row = &q.q[static_cast<std::size_t>(s * q.n_actions)];
        for (int a = 0; a < q.n_actions; ++a) scores[static_cast<std::size_t>(a)] += b * row[a];
    }
    return scores;
}

int greedy_argmax(const std::vector<double>& scores, double tie_eps) {
    double best = scores[0];
    for (double s : scores) best = std::max(best, s);
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (scores[a] >= best - tie_eps) return static_cast<int>(a);
    }
    return 0;
}

int qmdp_action(const QTable& q, const Belief& belief) {
    return greedy_argmax(qmdp_scores(q, belief));
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
    double g = 1.0;
    double total = 0.0;
    for (double r : rewards) {
        total += g * r;
        g *= gamma;
    }
    return total;
}

}  // namespace qmdpnet
