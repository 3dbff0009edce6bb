#ifndef QMDPNET_NET_HPP
#define QMDPNET_NET_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmdpnet/domains.hpp"
#include "qmdpnet/graph.hpp"
#include "qmdpnet/pomdp.hpp"
#include "qmdpnet/tensor.hpp"

namespace qmdpnet {

enum class NetVariant : std::uint8_t { kTied, kUntied };

// Architecture of the recurrent filter+planner. Maze orientation planes are
// folded into the channel dimension: tensors are N x N x (G*C) with the
// orientation group G outermost, so group ops act along the trailing block.
struct NetConfig {
    DomainKind kind = DomainKind::kGrid;
    int n_rows = 10, n_cols = 10;
    int orientations = 1;   // G: 1 for grid/grasp, 4 for maze
    int n_actions = 5;
    int n_model_obs = 17;   // 16 for grasp
    int obs_bits = 4;       // task observation bit-count (6 for grasp)
    int k_iters = 30;
    NetVariant variant = NetVariant::kTied;

    int ft_kernel = 3;
    int fz_kernel = 3;      // first f_Z layer; 5 for grasp
    int fr_kernel = 3;
    int fz_filters = 150;
    int fr_filters = 150;
    int fo_hidden = 17;

    int theta_channels() const { return 2 + orientations; }
    int n_task_obs() const { return 1 << obs_bits; }
    // the observation map reads the obstacle channel, the reward map reads
    // obstacles and the goal; the belief channels only seed the filter
    int fz_in_channels() const { return 1; }
    int fr_in_channels() const { return 2; }

    // Component choices per domain: K = 30/54/90 for grids of 10/18/30,
    // 76/116 for mazes of 19/29, 20 for grasping, 30 for the hallway grids.
    static NetConfig for_domain(DomainKind kind, int n_rows, int n_cols,
                                NetVariant variant = NetVariant::kTied);
    void validate() const;
};

// All learnable weights, stored as unconstrained raw values; softmax/sigmoid
// kernel constraints are applied inside the forward graph. The *_direct
// tables carry exact ground-truth injections for the oracle tests and bypass
// the corresponding learned stack when present.
struct QmdpNetParams {
    NetConfig config;

    Tensor ft_logits;                 // k x k x G x (G*A), softmax per out-channel
    std::vector<Tensor> ftp_logits;   // tied: 1 kernel; untied: K unconstrained kernels
    // theta -> N x N x (G*O). Sigmoid-constrained kernels and no biases, so
    // the map stays nonnegative and the corrected belief stays a belief.
    Tensor fz_k1, fz_k2;
    Tensor fr_k1, fr_b1, fr_k2, fr_b2;  // theta -> N x N x (G*A)
    Tensor fo_w1, fo_b1, fo_w2, fo_b2;  // bits -> hidden tanh -> O softmax
    Tensor fpi_w, fpi_b;                // A -> A linear, then softmax

    std::optional<Tensor> fz_direct;  // N x N x (G*O)
    std::optional<Tensor> fr_direct;  // N x N x (G*A)
    std::optional<Tensor> fo_direct;  // n_task_obs x O, one-hot rows

    std::vector<std::pair<std::string, Tensor*>> parameters();
    std::vector<std::pair<std::string, const Tensor*>> parameters() const;
};

// Glorot-style uniform initialization of the raw values, biases zero,
// deterministic per seed.
QmdpNetParams init_params(const NetConfig& config, std::uint64_t seed);

// Pins the network to the ground truth of a shift-invariant grid model
// (build_shift_invariant_pomdp): fT/fT' logits whose softmax reproduces the
// true displacement kernels (the planner kernel is the filter kernel
// flipped, matching the adjoint roles of prediction and backup), direct
// Z/R tables, the bit-pattern one-hot observation map and an identity f_pi.
// Models whose dynamics are not expressible by one spatial kernel raise
// std::invalid_argument.
QmdpNetParams inject_ground_truth(const NetConfig& config, const TabularPomdp& shift_model,
                                  const GridEnv& env);

// Planner depth change for execution-time transfer; tied variant only,
// parameters are untouched.
void expand_k(QmdpNetParams& params, int k_new);

std::uint64_t params_checksum(const QmdpNetParams& params);

// ---------------------------------------------------------------------------
// plain (no-tape) forward path, used by rollouts and evaluation

// Copies (and exactly renormalizes) the belief channels of theta.
// Rejects channels whose mass is off by more than 1e-6.
Tensor net_init_belief(const NetConfig& config, const Tensor& theta);

Tensor net_z_map(const QmdpNetParams& params, const Tensor& theta);
Tensor net_r_map(const QmdpNetParams& params, const Tensor& theta);
// K Bellman iterations from V0 = 0 over the reward map.
Tensor net_planner(const QmdpNetParams& params, const Tensor& r_map, int k_iters);
Tensor net_obs_weights(const QmdpNetParams& params, int obs_index);
// One recurrent step: prediction conv + soft action indexing, observation
// soft indexing into the Z map, pointwise correction, renormalization.
// action == n_actions is the virtual stay used at reset by domains without
// a stay action: the prediction step is skipped.
Tensor net_filter_step(const QmdpNetParams& params, const Tensor& belief, int action,
                       int obs_index, const Tensor& z_map);
// Belief-weighted Q values after the f_pi linear layer (pre-softmax).
Tensor net_action_scores(const QmdpNetParams& params, const Tensor& q_k, const Tensor& belief);
Tensor net_action_probs(const QmdpNetParams& params, const Tensor& q_k, const Tensor& belief);

// ---------------------------------------------------------------------------
// tape builders (training / gradient checks). Parameter nodes are registered
// once per graph; builders mirror the plain path exactly.

struct NetNodes {
    NodeId ft = -1;
    std::vector<NodeId> ftp;
    NodeId fz_k1 = -1, fz_k2 = -1;
    NodeId fr_k1 = -1, fr_b1 = -1, fr_k2 = -1, fr_b2 = -1;
    NodeId fo_w1 = -1, fo_b1 = -1, fo_w2 = -1, fo_b2 = -1;
    NodeId fpi_w = -1, fpi_b = -1;

    std::vector<std::pair<std::string, NodeId>> named() const;
};

NetNodes g_register_params(Graph& g, const QmdpNetParams& params);
NodeId g_z_map(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId theta);
NodeId g_r_map(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId theta);
NodeId g_planner(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId r_map,
                 int k_iters);
NodeId g_filter_step(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId belief,
                     int action, int obs_index, NodeId z_map);
NodeId g_action_probs(Graph& g, const QmdpNetParams& params, const NetNodes& p, NodeId q_k,
                      NodeId belief);

// Rebuilds the node handles from parameter ids laid out in parameters()
// order (the grad-check harness owns the ids).
NetNodes net_nodes_from_ids(const QmdpNetParams& params, const std::vector<NodeId>& ids);

// One filter step + K planner iterations + action head + cross-entropy:
// the composed training step used by the gradient-integrity checks.
NodeId g_composed_step_loss(Graph& g, const QmdpNetParams& params, const NetNodes& p,
                            const Tensor& theta, int action, int obs_index, int label,
                            int k_iters);

// ---------------------------------------------------------------------------
// model files: manifest.json (config + metadata) + one QNTD file per tensor

void save_model(const QmdpNetParams& params, const std::string& directory,
                const std::string& metadata_json = "{}");
QmdpNetParams load_model(const std::string& directory);

}  // namespace qmdpnet

#endif
