#include "qmdpnet/net.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "qmdpnet/errors.hpp"
#include "qmdpnet/qntd.hpp"

namespace qmdpnet {

namespace fs = std::filesystem;
using nlohmann::json;

NetConfig NetConfig::for_domain(DomainKind kind, int n_rows, int n_cols, NetVariant variant) {
    NetConfig c;
    c.kind = kind;
    c.n_rows = n_rows;
    c.n_cols = n_cols;
    c.variant = variant;
    switch (kind) {
        case DomainKind::kGrid: {
            c.orientations = 1;
            c.n_actions = 5;
            c.n_model_obs = 17;
            c.obs_bits = 4;
            const int n = std::max(n_rows, n_cols);
            c.k_iters = n <= 10 ? 30 : n <= 18 ? 54 : 90;
            break;
        }
        case DomainKind::kHallway2Grid:
            c.orientations = 1;
            c.n_actions = 5;
            c.n_model_obs = 17;
            c.obs_bits = 4;
            c.k_iters = 30;
            break;
        case DomainKind::kMaze: {
            c.orientations = 4;
            c.n_actions = 4;
            c.n_model_obs = 17;
            c.obs_bits = 4;
            c.k_iters = std::max(n_rows, n_cols) <= 19 ? 76 : 116;
            break;
        }
        case DomainKind::kGrasp:
            c.orientations = 1;
            c.n_actions = 4;
            c.n_model_obs = 16;
            c.obs_bits = 6;
            c.k_iters = 20;
            c.fz_kernel = 5;  // wider first layer for the more distant touch readings
            break;
    }
    c.validate();
    return c;
}

void NetConfig::validate() const {
    if (k_iters < 1) throw std::invalid_argument("NetConfig: K must be >= 1");
    if (ft_kernel % 2 == 0 || fz_kernel % 2 == 0 || fr_kernel % 2 == 0)
        throw std::invalid_argument("NetConfig: kernel sizes must be odd");
    if (kind == DomainKind::kGrasp && fz_kernel != 5)
        throw std::invalid_argument("NetConfig: grasp requires a 5x5 first f_Z kernel");
    if (n_rows <= 0 || n_cols <= 0 || n_actions <= 0 || n_model_obs <= 0 || obs_bits <= 0)
        throw std::invalid_argument("NetConfig: bad extents");
}

std::vector<std::pair<std::string, Tensor*>> QmdpNetParams::parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("ft_logits", &ft_logits);
    for (std::size_t i = 0; i < ftp_logits.size(); ++i)
        out.emplace_back(ftp_logits.size() == 1 ? "ftp_logits" : "ftp_logits" + std::to_string(i),
                         &ftp_logits[i]);
    out.emplace_back("fz_k1", &fz_k1);
    out.emplace_back("fz_k2", &fz_k2);
    out.emplace_back("fr_k1", &fr_k1);
    out.emplace_back("fr_b1", &fr_b1);
    out.emplace_back("fr_k2", &fr_k2);
    out.emplace_back("fr_b2", &fr_b2);
    out.emplace_back("fo_w1", &fo_w1);
    out.emplace_back("fo_b1", &fo_b1);
    out.emplace_back("fo_w2", &fo_w2);
    out.emplace_back("fo_b2", &fo_b2);
    out.emplace_back("fpi_w", &fpi_w);
    out.emplace_back("fpi_b", &fpi_b);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> QmdpNetParams::parameters() const {
    auto mut = const_cast<QmdpNetParams*>(this)->parameters();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& kv : mut) out.emplace_back(kv.first, kv.second);
    return out;
}

namespace {
Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t.vec()) v = rng.next_range(-bound, bound);
    return t;
}
}  // namespace

QmdpNetParams init_params(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed ^ 0x696e6974ULL);
    QmdpNetParams p;
    p.config = config;
    const int g = config.orientations;
    const int a = config.n_actions;
    const int o = config.n_model_obs;
    const int tc = config.theta_channels();
    const int kt = config.ft_kernel, kz = config.fz_kernel, kr = config.fr_kernel;

    p.ft_logits = glorot_uniform({kt, kt, g, g * a}, kt * kt * g, g * a, rng);
    const int n_ftp = config.variant == NetVariant::kUntied ? config.k_iters : 1;
    for (int i = 0; i < n_ftp; ++i)
        p.ftp_logits.push_back(glorot_uniform({kt, kt, g, g * a}, kt * kt * g, g * a, rng));

    p.fz_k1 = glorot_uniform({kz, kz, config.fz_in_channels(), config.fz_filters},
                             kz * kz * config.fz_in_channels(), config.fz_filters, rng);
    // wide, shifted logits: the constrained kernels spread over (~0.002, 0.5)
    // so observation channels decorrelate from the start and the map stays
    // O(1) instead of O(filters)
    p.fz_k2 = glorot_uniform({1, 1, config.fz_filters, g * o}, config.fz_filters, g * o, rng);
    for (double& v : p.fz_k2.vec()) v = 6.0 * v - 4.0;
    p.fr_k1 = glorot_uniform({kr, kr, config.fr_in_channels(), config.fr_filters},
                             kr * kr * config.fr_in_channels(), config.fr_filters, rng);
    // small distinct bias offsets: the binary task image would otherwise put
    // relu pre-activations exactly on the kink and tie all planner channels
    // cell-for-cell, which breaks both learning signals and derivative checks
    p.fr_b1 = Tensor::full({config.fr_filters}, 0.01);
    p.fr_k2 = glorot_uniform({1, 1, config.fr_filters, g * a}, config.fr_filters, g * a, rng);
    p.fr_b2 = Tensor({g * a});
    for (int j = 0; j < g * a; ++j) p.fr_b2[j] = 1e-3 * (j + 1);
    p.fo_w1 = glorot_uniform({config.obs_bits, config.fo_hidden}, config.obs_bits,
                             config.fo_hidden, rng);
    p.fo_b1 = Tensor({config.fo_hidden});
    p.fo_w2 = glorot_uniform({config.fo_hidden, o}, config.fo_hidden, o, rng);
    p.fo_b2 = Tensor({o});
    // identity head: the belief-weighted Q values drive the policy from the
    // first step, so planner gradients stay alive
    p.fpi_w = Tensor({a, a});
    for (int i = 0; i < a; ++i) p.fpi_w.at(i, i) = 1.0;
    p.fpi_b = Tensor({a});
    return p;
}

void expand_k(QmdpNetParams& params, int k_new) {
    if (params.config.variant == NetVariant::kUntied)
        throw UnsupportedVariantError("expand_k: untied planner layers cannot be expanded");
    if (k_new < 1) throw std::invalid_argument("expand_k: K must be >= 1");
    params.config.k_iters = k_new;
}

std::uint64_t params_checksum(const QmdpNetParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& kv : params.parameters()) {
        h = fnv1a(kv.first.data(), kv.first.size(), h);
        h = fnv1a(kv.second->data(), kv.second->vec().size() * sizeof(double), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// plain forward path

Tensor net_init_belief(const NetConfig& config, const Tensor& theta) {
    if (theta.rank() != 3 || theta.dim(0) != config.n_rows || theta.dim(1) != config.n_cols ||
        theta.dim(2) != config.theta_channels())
        throw std::invalid_argument("net_init_belief: theta shape does not match config");
    const int g = config.orientations;
    Tensor b({config.n_rows, config.n_cols, g});
    double total = 0.0;
    for (int r = 0; r < config.n_rows; ++r)
        for (int c = 0; c < config.n_cols; ++c)
            for (int k = 0; k < g; ++k) {
                const double v = theta.at(r, c, 2 + k);
                if (v < 0.0) throw std::invalid_argument("net_init_belief: negative belief mass");
                b.at(r, c, k) = v;
                total += v;
            }
    if (std::fabs(total - 1.0) > 1e-6)
        throw std::invalid_argument("net_init_belief: belief channel not normalized");
    for (double& v : b.vec()) v /= total;
    return b;
}

namespace {
Tensor one_hot(int index, int n) {
    Tensor t({n});
    t[index] = 1.0;
    return t;
}

Tensor obs_bit_vector(const NetConfig& config, int obs_index) {
    Tensor bits({config.obs_bits});
    for (int i = 0; i < config.obs_bits; ++i) bits[i] = (obs_index >> i) & 1;
    return bits;
}
}  // namespace

namespace {
Tensor leading_channels(const Tensor& theta, int count) {
    Tensor out({theta.dim(0), theta.dim(1), count});
    for (int r = 0; r < theta.dim(0); ++r)
        for (int c = 0; c < theta.dim(1); ++c)
            for (int k = 0; k < count; ++k) out.at(r, c, k) = theta.at(r, c, k);
    return out;
}
}  // namespace

Tensor net_z_map(const QmdpNetParams& params, const Tensor& theta) {
    if (params.fz_direct) return *params.fz_direct;
    Tensor h1 = conv2d(leading_channels(theta, params.config.fz_in_channels()),
                       sigmoid(params.fz_k1));
    return conv2d(h1, sigmoid(params.fz_k2));
}

Tensor net_r_map(const QmdpNetParams& params, const Tensor& theta) {
    if (params.fr_direct) return *params.fr_direct;
    Tensor h1 = relu(add_channel_bias(
        conv2d(leading_channels(theta, params.config.fr_in_channels()), params.fr_k1),
        params.fr_b1));
    return add_channel_bias(conv2d(h1, params.fr_k2), params.fr_b2);
}

Tensor net_planner(const QmdpNetParams& params, const Tensor& r_map, int k_iters) {
    const NetConfig& c = params.config;
    const bool untied = c.variant == NetVariant::kUntied;
    if (untied && k_iters != static_cast<int>(params.ftp_logits.size()))
        throw UnsupportedVariantError("net_planner: untied variant is fixed to its trained K");

    Tensor q = r_map;                                        // Q_1 = R (V_0 = 0)
    Tensor v = channel_group_max(q, c.orientations);
    Tensor tied_kernel;
    if (!untied) tied_kernel = kernel_softmax(params.ftp_logits[0]);
    for (int k = 1; k < k_iters; ++k) {
        const Tensor& kernel =
            untied ? params.ftp_logits[static_cast<std::size_t>(k)] : tied_kernel;
        q = add(r_map, conv2d(v, kernel));
        v = channel_group_max(q, c.orientations);
    }
    return q;
}

Tensor net_obs_weights(const QmdpNetParams& params, int obs_index) {
    const NetConfig& c = params.config;
    if (obs_index < 0 || obs_index >= c.n_task_obs())
        throw std::invalid_argument("net_obs_weights: observation out of range");
    if (params.fo_direct) {
        Tensor w({c.n_model_obs});
        for (int i = 0; i < c.n_model_obs; ++i) w[i] = params.fo_direct->at(obs_index, i);
        return w;
    }
    Tensor bits = obs_bit_vector(c, obs_index);
    Tensor h = tanh_op(fully_connected(bits, params.fo_w1, params.fo_b1));
    return softmax_vec(fully_connected(h, params.fo_w2, params.fo_b2));
}

Tensor net_filter_step(const QmdpNetParams& params, const Tensor& belief, int action,
                       int obs_index, const Tensor& z_map) {
    const NetConfig& c = params.config;
    Tensor predicted;
    if (action == c.n_actions) {
        predicted = belief;  // virtual stay at reset: correction only
    } else {
        if (action < 0 || action > c.n_actions)
            throw std::invalid_argument("net_filter_step: invalid action");
        Tensor full = conv2d(belief, kernel_softmax(params.ft_logits));
        predicted = group_weighted_channel_sum(full, one_hot(action, c.n_actions),
                                               c.orientations);
    }
    Tensor w_o = net_obs_weights(params, obs_index);
    Tensor z_sel = group_weighted_channel_sum(z_map, w_o, c.orientations);
    if (!params.fz_direct) {
        // stabilizer for the learned map (boards whose windows are empty
        // produce an exactly zero map at init); injected tables stay exact
        for (double& v : z_sel.vec()) v += 1e-9;
    }
    return normalize_sum1(mul(predicted, z_sel));
}

Tensor net_action_scores(const QmdpNetParams& params, const Tensor& q_k, const Tensor& belief) {
    Tensor q_vec = group_spatial_weighted_sum(q_k, belief, params.config.orientations);
    return fully_connected(q_vec, params.fpi_w, params.fpi_b);
}

Tensor net_action_probs(const QmdpNetParams& params, const Tensor& q_k, const Tensor& belief) {
    return softmax_vec(net_action_scores(params, q_k, belief));
}

// ---------------------------------------------------------------------------
// tape builders

std::vector<std::pair<std::string, NodeId>> NetNodes::named() const {
    std::vector<std::pair<std::string, NodeId>> out;
    out.emplace_back("ft_logits", ft);
    for (std::size_t i = 0; i < ftp.size(); ++i)
        out.emplace_back(ftp.size() == 1 ? "ftp_logits" : "ftp_logits" + std::to_string(i),
                         ftp[i]);
    out.emplace_back("fz_k1", fz_k1);
    out.emplace_back("fz_k2", fz_k2);
    out.emplace_back("fr_k1", fr_k1);
    out.emplace_back("fr_b1", fr_b1);
    out.emplace_back("fr_k2", fr_k2);
    out.emplace_back("fr_b2", fr_b2);
    out.emplace_back("fo_w1", fo_w1);
    out.emplace_back("fo_b1", fo_b1);
    out.emplace_back("fo_w2", fo_w2);
    out.emplace_back("fo_b2", fo_b2);
    out.emplace_back("fpi_w", fpi_w);
    out.emplace_back("fpi_b", fpi_b);
    return out;
}

NetNodes g_register_params(Graph& g, const QmdpNetParams& params) {
    NetNodes n;
    n.ft = g.param(params.ft_logits);
    for (const Tensor& t : params.ftp_logits) n.ftp.push_back(g.param(t));
    n.fz_k1 = g.param(params.fz_k1);
    n.fz_k2 = g.param(params.fz_k2);
    n.fr_k1 = g.param(params.fr_k1);
    n.fr_b1 = g.param(params.fr_b1);
    n.fr_k2 = g.param(params.fr_k2);
    n.fr_b2 = g.param(params.fr_b2);
    n.fo_w1 = g.param(params.fo_w1);
    n.fo_b1 = g.param(params.fo_b1);
    n.fo_w2 = g.param(params.fo_w2);
    n.fo_b2 = g.param(params.fo_b2);
    n.fpi_w = g.param(params.fpi_w);
    n.fpi_b = g.param(params.fpi_b);
    return n;
}

NodeId g_z_map(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId theta) {
    if (params.fz_direct) return g.constant(*params.fz_direct);
    NodeId in = g.constant(leading_channels(g.value(theta), params.config.fz_in_channels()));
    NodeId h1 = g.conv2d(in, g.sigmoid(p.fz_k1));
    return g.conv2d(h1, g.sigmoid(p.fz_k2));
}

NodeId g_r_map(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId theta) {
    if (params.fr_direct) return g.constant(*params.fr_direct);
    NodeId in = g.constant(leading_channels(g.value(theta), params.config.fr_in_channels()));
    NodeId h1 = g.relu(g.add_channel_bias(g.conv2d(in, p.fr_k1), p.fr_b1));
    return g.add_channel_bias(g.conv2d(h1, p.fr_k2), p.fr_b2);
}

NodeId g_planner(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId r_map,
                 int k_iters) {
    const NetConfig& c = params.config;
    const bool untied = c.variant == NetVariant::kUntied;
    if (untied && k_iters != static_cast<int>(p.ftp.size()))
        throw UnsupportedVariantError("g_planner: untied variant is fixed to its trained K");
    NodeId tied_kernel = -1;
    if (!untied) tied_kernel = g.kernel_softmax(p.ftp[0]);
    NodeId q = r_map;
    NodeId v = g.channel_group_max(q, c.orientations);
    for (int k = 1; k < k_iters; ++k) {
        NodeId kernel = untied ? p.ftp[static_cast<std::size_t>(k)] : tied_kernel;
        q = g.add(r_map, g.conv2d(v, kernel));
        v = g.channel_group_max(q, c.orientations);
    }
    return q;
}

NodeId g_filter_step(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId belief,
                     int action, int obs_index, NodeId z_map) {
    const NetConfig& c = params.config;
    NodeId predicted;
    if (action == c.n_actions) {
        predicted = belief;
    } else {
        NodeId full = g.conv2d(belief, g.kernel_softmax(p.ft));
        predicted = g.group_weighted_channel_sum(full, g.constant(one_hot(action, c.n_actions)),
                                                 c.orientations);
    }
    NodeId w_o;
    if (params.fo_direct) {
        Tensor w({c.n_model_obs});
        for (int i = 0; i < c.n_model_obs; ++i) w[i] = params.fo_direct->at(obs_index, i);
        w_o = g.constant(w);
    } else {
        NodeId bits = g.constant(obs_bit_vector(c, obs_index));
        NodeId h = g.tanh_op(g.fully_connected(bits, p.fo_w1, p.fo_b1));
        w_o = g.softmax_vec(g.fully_connected(h, p.fo_w2, p.fo_b2));
    }
    NodeId z_sel = g.group_weighted_channel_sum(z_map, w_o, c.orientations);
    if (!params.fz_direct)
        z_sel = g.add(z_sel, g.constant(Tensor::full(g.value(z_sel).shape(), 1e-9)));
    return g.normalize_sum1(g.mul(predicted, z_sel));
}

NodeId g_action_probs(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId q_k,
                      NodeId belief) {
    NodeId q_vec = g.group_spatial_weighted_sum(q_k, belief, params.config.orientations);
    return g.softmax_vec(g.fully_connected(q_vec, p.fpi_w, p.fpi_b));
}

NetNodes net_nodes_from_ids(const QmdpNetParams& params, const std::vector<NodeId>& ids) {
    NetNodes n;
    std::size_t i = 0;
    auto take = [&]() { return ids.at(i++); };
    n.ft = take();
    for (std::size_t k = 0; k < params.ftp_logits.size(); ++k) n.ftp.push_back(take());
    n.fz_k1 = take();
    n.fz_k2 = take();
    n.fr_k1 = take();
    n.fr_b1 = take();
    n.fr_k2 = take();
    n.fr_b2 = take();
    n.fo_w1 = take();
    n.fo_b1 = take();
    n.fo_w2 = take();
    n.fo_b2 = take();
    n.fpi_w = take();
    n.fpi_b = take();
    return n;
}

NodeId g_composed_step_loss(Graph& g, const QmdpNetParams& params, const NetNodes& p,
                            const Tensor& theta, int action, int obs_index, int label,
                            int k_iters) {
    NodeId theta_node = g.constant(theta);
    NodeId z_map = g_z_map(g, params, p, theta_node);
    NodeId r_map = g_r_map(g, params, p, theta_node);
    NodeId q_k = g_planner(g, params, p, r_map, k_iters);
    NodeId b0 = g.constant(net_init_belief(params.config, theta));
    NodeId b1 = g_filter_step(g, params, p, b0, action, obs_index, z_map);
    NodeId probs = g_action_probs(g, params, p, q_k, b1);
    return g.cross_entropy(probs, label);
}

// ---------------------------------------------------------------------------
// ground-truth injection

namespace {
// Extracts the per-action displacement kernel of a shift-invariant grid
// model and verifies every row against it; the void state absorbs the
// off-board taps.
std::vector<Tensor> extract_displacement_kernels(const TabularPomdp& m, const GridEnv& env,
                                                 int k) {
    const int h = env.height, w = env.width;
    const int cells = h * w;
    const int void_s = cells;
    if (m.n_states() != cells + 1)
        throw std::invalid_argument(
            "inject_ground_truth: model is not the shift-invariant grid form");
    const int c = (k - 1) / 2;
    const int na = m.n_actions();
    if (h <= 2 * c || w <= 2 * c)
        throw std::invalid_argument("inject_ground_truth: board too small for the kernel");

    std::vector<Tensor> kernels;
    const int ur = h / 2, uc = w / 2;  // interior reference cell
    for (int a = 0; a < na; ++a) {
        Tensor kern({k, k});
        const int u = ur * w + uc;
        for (int dx = 0; dx < k; ++dx)
            for (int dy = 0; dy < k; ++dy) {
                // prediction adjoint: tap (dx,dy) reads the source cell
                // u' = u + (dx-c, dy-c), so its weight is T(u', a, u)
                const int sr = ur + dx - c, sc = uc + dy - c;
                kern.at(dx, dy) = m.t(a, sr * w + sc, u);
            }
        // verify spatial invariance: every row must project this kernel
        for (int r = 0; r < h; ++r)
            for (int cc = 0; cc < w; ++cc) {
                const int s = r * w + cc;
                double off_board = 0.0;
                for (int dx = 0; dx < k; ++dx)
                    for (int dy = 0; dy < k; ++dy) {
                        const double p = kern.at(k - 1 - dx, k - 1 - dy);  // forward direction
                        const int tr = r + dx - c, tc = cc + dy - c;
                        const double expect =
                            env.in_bounds(tr, tc) ? m.t(a, s, tr * w + tc) : 0.0;
                        if (env.in_bounds(tr, tc)) {
                            if (std::fabs(p - expect) > 1e-12)
                                throw std::invalid_argument(
                                    "inject_ground_truth: dynamics are not translation-"
                                    "invariant (cannot be represented)");
                        } else {
                            off_board += p;
                        }
                    }
                if (std::fabs(off_board - m.t(a, s, void_s)) > 1e-12)
                    throw std::invalid_argument(
                        "inject_ground_truth: off-board mass does not match the void state");
            }
        kernels.push_back(std::move(kern));
    }
    return kernels;
}

// log of the kernel with a floor low enough that softmax reproduces exact
// zeros and ones to ~1e-35.
double safe_logit(double p) { return std::log(std::max(p, 1e-35)); }
}  // namespace

QmdpNetParams inject_ground_truth(const NetConfig& config, const TabularPomdp& shift_model,
                                  const GridEnv& env) {
    if (env.kind != DomainKind::kGrid && env.kind != DomainKind::kHallway2Grid)
        throw std::invalid_argument("inject_ground_truth: grid domains only");
    if (config.orientations != 1 || config.n_actions != env.n_actions())
        throw std::invalid_argument("inject_ground_truth: config does not match the domain");
    if (config.n_rows != env.height || config.n_cols != env.width)
        throw std::invalid_argument("inject_ground_truth: config dims do not match the board");

    QmdpNetParams p = init_params(config, 0);
    const int k = config.ft_kernel;
    const int a_n = config.n_actions;
    std::vector<Tensor> kernels = extract_displacement_kernels(shift_model, env, k);

    // filter kernel: adjoint (source-offset) orientation
    for (int a = 0; a < a_n; ++a)
        for (int dx = 0; dx < k; ++dx)
            for (int dy = 0; dy < k; ++dy)
                p.ft_logits.at(dx, dy, 0, a) = safe_logit(kernels[static_cast<std::size_t>(a)]
                                                              .at(dx, dy));
    // planner kernel: forward expectation, the filter kernel flipped 180
    for (Tensor& t : p.ftp_logits)
        for (int a = 0; a < a_n; ++a)
            for (int dx = 0; dx < k; ++dx)
                for (int dy = 0; dy < k; ++dy)
                    t.at(dx, dy, 0, a) = safe_logit(
                        kernels[static_cast<std::size_t>(a)].at(k - 1 - dx, k - 1 - dy));

    // exact observation and reward tables over the board
    const int h = env.height, w = env.width;
    Tensor z({h, w, config.n_model_obs});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int o = 0; o < 16; ++o) z.at(r, c, o) = shift_model.z(0, r * w + c, o);
    p.fz_direct = std::move(z);

    Tensor rmap({h, w, a_n});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int a = 0; a < a_n; ++a) rmap.at(r, c, a) = shift_model.r(r * w + c, a);
    p.fr_direct = std::move(rmap);

    Tensor fo({config.n_task_obs(), config.n_model_obs});
    for (int o = 0; o < config.n_task_obs(); ++o) fo.at(o, o) = 1.0;
    p.fo_direct = std::move(fo);

    p.fpi_w = Tensor({a_n, a_n});
    for (int a = 0; a < a_n; ++a) p.fpi_w.at(a, a) = 1.0;
    p.fpi_b = Tensor({a_n});
    return p;
}

// ---------------------------------------------------------------------------
// model files

void save_model(const QmdpNetParams& params, const std::string& directory,
                const std::string& metadata_json) {
    fs::create_directories(directory);
    const NetConfig& c = params.config;
    json j;
    j["format"] = "qmdpnet-model";
    j["format_version"] = 1;
    j["domain"] = domain_kind_name(c.kind);
    j["n_rows"] = c.n_rows;
    j["n_cols"] = c.n_cols;
    j["orientations"] = c.orientations;
    j["n_actions"] = c.n_actions;
    j["n_model_obs"] = c.n_model_obs;
    j["obs_bits"] = c.obs_bits;
    j["k_iters"] = c.k_iters;
    j["variant"] = c.variant == NetVariant::kTied ? "tied" : "untied";
    j["ft_kernel"] = c.ft_kernel;
    j["fz_kernel"] = c.fz_kernel;
    j["fr_kernel"] = c.fr_kernel;
    j["fz_filters"] = c.fz_filters;
    j["fr_filters"] = c.fr_filters;
    j["fo_hidden"] = c.fo_hidden;
    j["metadata"] = json::parse(metadata_json);
    json tensors = json::array();
    for (const auto& kv : params.parameters()) tensors.push_back(kv.first);
    j["tensors"] = tensors;
    std::ofstream out(directory + "/manifest.json", std::ios::binary);
    if (!out) throw FormatError("model: cannot write manifest.json");
    out << j.dump(2) << "\n";

    for (const auto& kv : params.parameters()) {
        std::vector<float> data(static_cast<std::size_t>(kv.second->numel()));
        for (int i = 0; i < kv.second->numel(); ++i)
            data[static_cast<std::size_t>(i)] = static_cast<float>((*kv.second)[i]);
        write_qntd_f32(directory + "/" + kv.first + ".qntd", kv.second->shape(), data);
    }
}

QmdpNetParams load_model(const std::string& directory) {
    std::ifstream in(directory + "/manifest.json", std::ios::binary);
    if (!in) throw FormatError("model: missing manifest.json in " + directory);
    json j = json::parse(in, nullptr, true);
    if (j.value("format", "") != "qmdpnet-model")
        throw FormatError("model: manifest is not a model manifest");
    if (j.at("format_version").get<int>() != 1)
        throw FormatError("model: unsupported format version");

    NetConfig c;
    c.kind = domain_kind_from_name(j.at("domain").get<std::string>());
    c.n_rows = j.at("n_rows").get<int>();
    c.n_cols = j.at("n_cols").get<int>();
    c.orientations = j.at("orientations").get<int>();
    c.n_actions = j.at("n_actions").get<int>();
    c.n_model_obs = j.at("n_model_obs").get<int>();
    c.obs_bits = j.at("obs_bits").get<int>();
    c.k_iters = j.at("k_iters").get<int>();
    c.variant = j.at("variant").get<std::string>() == "untied" ? NetVariant::kUntied
                                                               : NetVariant::kTied;
    c.ft_kernel = j.at("ft_kernel").get<int>();
    c.fz_kernel = j.at("fz_kernel").get<int>();
    c.fr_kernel = j.at("fr_kernel").get<int>();
    c.fz_filters = j.at("fz_filters").get<int>();
    c.fr_filters = j.at("fr_filters").get<int>();
    c.fo_hidden = j.at("fo_hidden").get<int>();
    c.validate();

    QmdpNetParams p = init_params(c, 0);
    for (auto& kv : p.parameters()) {
        QntdTensor t = read_qntd(directory + "/" + kv.first + ".qntd");
        if (t.is_u8) throw FormatError("model: tensor " + kv.first + " has wrong element type");
        if (t.dims != kv.second->shape())
            throw FormatError("model: tensor " + kv.first + " shape disagrees with config");
        for (int i = 0; i < kv.second->numel(); ++i)
            (*kv.second)[i] = static_cast<double>(t.f32[static_cast<std::size_t>(i)]);
    }
    return p;
}

}  // namespace qmdpnet
