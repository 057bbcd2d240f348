#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

// Minimal dense-network engine: forward pass, backpropagation, Adam updates,
// masked/dense mean-squared objectives and finite-difference gradient checking.
// Batches follow the row-major convention: one sample per row.

namespace cdrec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { ReLU, Identity };

struct DenseLayer {
    Matrix W;  // out x in
    Vector b;  // out
    Activation activation = Activation::ReLU;

    int in_size() const { return static_cast<int>(W.cols()); }
    int out_size() const { return static_cast<int>(W.rows()); }
};

struct DenseNetwork {
    std::vector<DenseLayer> layers;

    int input_size() const;
    int output_size() const;
    std::size_t parameter_count() const;
};

/// Builds a fully-connected network with the given widths {in, h1, ..., out}.
/// Weights are scaled-uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
DenseNetwork make_network(const std::vector<int>& widths, std::mt19937_64& rng,
                          Activation hidden = Activation::ReLU,
                          Activation output = Activation::ReLU);

/// Concatenates networks into one (layer widths must be compatible).
DenseNetwork concat_networks(const std::vector<const DenseNetwork*>& parts);

/// Per-layer activations recorded during a forward pass, for backprop.
struct ForwardCache {
    std::vector<Matrix> inputs;  // inputs[i] = input to layer i; inputs[0] = x
    std::vector<Matrix> pre;     // pre[i] = W x^T + b before the activation
};

/// x is rows x in; returns rows x out. Throws on width mismatch.
Matrix dense_forward(const DenseNetwork& net, const Matrix& x, ForwardCache* cache = nullptr);

enum class LossKind { MaskedMSE, DenseMSE };

struct LossSpec {
    LossKind kind = LossKind::DenseMSE;
    double l2_weight = 0.0;  // applied to weights only, never biases
};

/// Mean of (pred-target)^2 over cells where mask == 1. Entries with mask == 0
/// contribute exactly 0 (bit-exact independence from their stored values).
/// Throws if the mask has no set entry.
double masked_mse(const Matrix& pred, const Matrix& target, const Matrix& mask);

double dense_mse(const Matrix& pred, const Matrix& target);

/// Data loss (no L2) and its gradient wrt pred. mask may be null for DenseMSE.
double mse_loss_grad(const Matrix& pred, const Matrix& target, const Matrix* mask,
                     Matrix& dpred);

struct Gradients {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
};

Gradients zero_gradients(const DenseNetwork& net);

/// Backpropagates an upstream gradient dL/dy through the network, accumulating
/// parameter gradients into grads (must be shaped via zero_gradients) and
/// returning dL/dx.
Matrix backprop_through(const DenseNetwork& net, const ForwardCache& cache,
                        const Matrix& dLdy, Gradients& grads);

/// Full backward pass for one network under the given loss, including the L2
/// term gradient 2 * l2_weight * W. mask is required iff loss.kind is MaskedMSE.
Gradients backprop(const DenseNetwork& net, const Matrix& x, const Matrix& target,
                   const Matrix* mask, const LossSpec& loss);

/// Loss value matching backprop(): data term plus l2_weight * sum ||W||_F^2.
double loss_value(const DenseNetwork& net, const Matrix& x, const Matrix& target,
                  const Matrix* mask, const LossSpec& loss);

double l2_penalty(const DenseNetwork& net, double l2_weight);
void add_l2_gradient(const DenseNetwork& net, double l2_weight, Gradients& grads);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-network Adam state; one step counter shared by all tensors.
struct AdamState {
    std::vector<Matrix> mW, vW;
    std::vector<Vector> mb, vb;
    std::int64_t t = 0;
    AdamParams hp;
};

AdamState make_adam_state(const DenseNetwork& net, AdamParams hp = {});

/// Standard Adam update with bias correction; increments t by exactly 1.
/// Throws (naming the offending tensor) if any gradient entry is non-finite.
void adam_step(DenseNetwork& net, const Gradients& grads, AdamState& state, double lr);

struct AdamMatrixState {
    Matrix m, v;
    std::int64_t t = 0;
    AdamParams hp;
};

AdamMatrixState make_adam_state(const Matrix& param, AdamParams hp = {});

void adam_step(Matrix& param, const Matrix& grad, AdamMatrixState& state, double lr,
               const std::string& name = "parameter");

/// Updates only the listed rows of param from grad_rows (|rows| x cols).
/// The shared step counter still advances once.
void adam_step_rows(Matrix& param, const Matrix& grad_rows, const std::vector<int>& rows,
                    AdamMatrixState& state, double lr, const std::string& name = "parameter");

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// with central differences of step h. Parameters whose perturbation flips the
/// sign of any ReLU pre-activation are skipped (their central difference is
/// invalid at the kink).
double grad_check(const DenseNetwork& net, const Matrix& x, const Matrix& target,
                  const Matrix* mask, const LossSpec& loss, double h = 1e-5);

/// True if any ReLU pre-activation of the forward pass lies within tol of 0.
bool near_relu_kink(const DenseNetwork& net, const Matrix& x, double tol = 1e-6);

/// Throws NumericalError if any parameter entry is NaN or infinite.
void check_finite(const DenseNetwork& net, const std::string& context);

/// Raised when training or an update produces non-finite values; carries the
/// stage name so the CLI can report which stage failed.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what, std::string stage_ = "")
        : std::runtime_error(what), stage(std::move(stage_)) {}
    std::string stage;
};

/// Deterministic seeded generator; salts separate independent streams.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t salt1 = 0, std::uint64_t salt2 = 0);

// ---- chain training -------------------------------------------------------
// Several networks composed head-to-tail and optimized jointly on one loss.
// This is the fixed composition the coupled stages train (e.g. encoder ->
// mapper -> decoder); each part keeps its own Adam state and L2 weight.

struct ChainPart {
    DenseNetwork* net = nullptr;
    AdamState* adam = nullptr;
    double l2 = 0.0;
};

struct StepStats {
    double sq_sum = 0.0;  // sum of squared masked residuals
    double count = 0.0;   // number of cells in the mean
};

/// Forward x through every part, evaluate the loss against target, backprop
/// through the whole chain and apply one Adam step per part. Empty masks are
/// tolerated (the step is skipped, stats report zero cells).
StepStats chain_step(std::vector<ChainPart>& parts, const Matrix& x, const Matrix& target,
                     const Matrix* mask, LossKind kind, double lr);

/// Forward through a sequence of networks without touching parameters.
Matrix chain_forward(const std::vector<const DenseNetwork*>& parts, const Matrix& x);

}  // namespace cdrec
