#include "cdrec/numerics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cdrec {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream os;
        os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs "
           << b.rows() << "x" << b.cols();
        throw std::invalid_argument(os.str());
    }
}

void require_binary_mask(const Matrix& mask) {
    require(((mask.array() == 0.0) || (mask.array() == 1.0)).all(),
            "mask entries must be 0 or 1");
}

Matrix apply_activation(Activation act, const Matrix& pre) {
    if (act == Activation::ReLU) return pre.cwiseMax(0.0);
    return pre;
}

// d(activation)/d(pre), with ReLU'(0) := 0.
Matrix activation_grad(Activation act, const Matrix& pre) {
    if (act == Activation::ReLU) return (pre.array() > 0.0).cast<double>().matrix();
    return Matrix::Ones(pre.rows(), pre.cols());
}

void check_grad_finite(const Matrix& g, const std::string& name) {
    if (!g.allFinite()) throw NumericalError("non-finite gradient in " + name);
}

double bias_correct1(const AdamParams& hp, std::int64_t t) {
    return 1.0 - std::pow(hp.beta1, static_cast<double>(t));
}

double bias_correct2(const AdamParams& hp, std::int64_t t) {
    return 1.0 - std::pow(hp.beta2, static_cast<double>(t));
}

}  // namespace

int DenseNetwork::input_size() const {
    require(!layers.empty(), "network has no layers");
    return layers.front().in_size();
}

int DenseNetwork::output_size() const {
    require(!layers.empty(), "network has no layers");
    return layers.back().out_size();
}

std::size_t DenseNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
}

DenseNetwork make_network(const std::vector<int>& widths, std::mt19937_64& rng,
                          Activation hidden, Activation output) {
    require(widths.size() >= 2, "make_network: need at least  {in, out}");
    for (int w : widths) require(w >= 1, "make_network: layer width must be >= 1");

    DenseNetwork net;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const int fan_in = widths[i];
        const int fan_out = widths[i + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer;
        layer.W = Matrix::NullaryExpr(fan_out, fan_in, [&]() { return dist(rng); });
        layer.b = Vector::Zero(fan_out);
        layer.activation = (i + 2 == widths.size()) ? output : hidden;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

DenseNetwork concat_networks(const std::vector<const DenseNetwork*>& parts) {
    DenseNetwork out;
    for (const DenseNetwork* p : parts) {
        require(p != nullptr && !p->layers.empty(), "concat_networks: empty part");
        if (!out.layers.empty()) {
            require(out.output_size() == p->input_size(),
                    "concat_networks: adjacent parts dimension-incompatible");
        }
        out.layers.insert(out.layers.end(), p->layers.begin(), p->layers.end());
    }
    return out;
}

Matrix dense_forward(const DenseNetwork& net, const Matrix& x, ForwardCache* cache) {
    require(!net.layers.empty(), "dense_forward: network has no layers");
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    Matrix cur = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const DenseLayer& layer = net.layers[i];
        if (cur.cols() != layer.in_size()) {
            std::ostringstream os;
            os << "dense_forward: layer " << i << " expects width " << layer.in_size()
               << ", got " << cur.cols();
            throw std::invalid_argument(os.str());
        }
        Matrix pre = (cur * layer.W.transpose()).rowwise() + layer.b.transpose();
        if (cache) {
            cache->inputs.push_back(std::move(cur));
            cache->pre.push_back(pre);
        }
        cur = apply_activation(layer.activation, pre);
    }
    return cur;
}

double masked_mse(const Matrix& pred, const Matrix& target, const Matrix& mask) {
    require_same_shape(pred, target, "masked_mse");
    require_same_shape(pred, mask, "masked_mse mask");
    require_binary_mask(mask);
    const double count = mask.sum();
    if (count < 1.0) throw std::invalid_argument("masked_mse: empty mask (undefined mean)");
    const Matrix diff = (pred - target).cwiseProduct(mask);
    return diff.squaredNorm() / count;
}

double dense_mse(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "dense_mse");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double mse_loss_grad(const Matrix& pred, const Matrix& target, const Matrix* mask,
                     Matrix& dpred) {
    if (mask) {
        require_same_shape(pred, target, "mse_loss_grad");
        require_same_shape(pred, *mask, "mse_loss_grad mask");
        require_binary_mask(*mask);
        const double count = mask->sum();
        if (count < 1.0) throw std::invalid_argument("mse_loss_grad: empty mask");
        const Matrix diff = (pred - target).cwiseProduct(*mask);
        dpred = (2.0 / count) * diff;
        return diff.squaredNorm() / count;
    }
    require_same_shape(pred, target, "mse_loss_grad");
    const Matrix diff = pred - target;
    const double count = static_cast<double>(pred.size());
    dpred = (2.0 / count) * diff;
    return diff.squaredNorm() / count;
}

Gradients zero_gradients(const DenseNetwork& net) {
    Gradients g;
    g.dW.reserve(net.layers.size());
    g.db.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        g.dW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
        g.db.push_back(Vector::Zero(l.b.size()));
    }
    return g;
}

Matrix backprop_through(const DenseNetwork& net, const ForwardCache& cache,
                        const Matrix& dLdy, Gradients& grads) {
    require(cache.inputs.size() == net.layers.size(), "backprop_through: stale cache");
    Matrix delta = dLdy;
    for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
        const DenseLayer& layer = net.layers[static_cast<std::size_t>(i)];
        const Matrix& pre = cache.pre[static_cast<std::size_t>(i)];
        const Matrix& in = cache.inputs[static_cast<std::size_t>(i)];
        delta = delta.cwiseProduct(activation_grad(layer.activation, pre));
        grads.dW[static_cast<std::size_t>(i)] += delta.transpose() * in;
        grads.db[static_cast<std::size_t>(i)] += delta.colwise().sum().transpose();
        if (i > 0) delta = delta * layer.W;  // dL/d(input of layer i)
    }
    // gradient wrt the original input
    return delta * net.layers.front().W;
}

Gradients backprop(const DenseNetwork& net, const Matrix& x, const Matrix& target,
                   const Matrix* mask, const LossSpec& loss) {
    if (loss.kind == LossKind::MaskedMSE) {
        require(mask != nullptr, "backprop: MaskedMSE requires a mask");
    } else {
        require(mask == nullptr, "backprop: DenseMSE takes no mask");
    }
    ForwardCache cache;
    const Matrix pred = dense_forward(net, x, &cache);
    Matrix dpred;
    mse_loss_grad(pred, target, mask, dpred);
    Gradients grads = zero_gradients(net);
    backprop_through(net, cache, dpred, grads);
    add_l2_gradient(net, loss.l2_weight, grads);
    return grads;
}

double loss_value(const DenseNetwork& net, const Matrix& x, const Matrix& target,
                  const Matrix* mask, const LossSpec& loss) {
    const Matrix pred = dense_forward(net, x);
    double data = loss.kind == LossKind::MaskedMSE ? masked_mse(pred, target, *mask)
                                                   : dense_mse(pred, target);
    return data + l2_penalty(net, loss.l2_weight);
}

double l2_penalty(const DenseNetwork& net, double l2_weight) {
    if (l2_weight == 0.0) return 0.0;
    double sum = 0.0;
    for (const auto& l : net.layers) sum += l.W.squaredNorm();
    return l2_weight * sum;
}

void add_l2_gradient(const DenseNetwork& net, double l2_weight, Gradients& grads) {
    if (l2_weight == 0.0) return;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        grads.dW[i] += (2.0 * l2_weight) * net.layers[i].W;
    }
}

AdamState make_adam_state(const DenseNetwork& net, AdamParams hp) {
    AdamState st;
    st.hp = hp;
    for (const auto& l : net.layers) {
        st.mW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
        st.vW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
        st.mb.push_back(Vector::Zero(l.b.size()));
        st.vb.push_back(Vector::Zero(l.b.size()));
    }
    return st;
}

namespace {

template <typename Mat>
void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v, const AdamParams& hp,
                 std::int64_t t, double lr) {
    m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
    v = hp.beta2 * v + (1.0 - hp.beta2) * grad.cwiseProduct(grad);
    const double bc1 = bias_correct1(hp, t);
    const double bc2 = bias_correct2(hp, t);
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    param -= lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt() + Mat::Constant(v.rows(), v.cols(), hp.eps));
}

}  // namespace

void adam_step(DenseNetwork& net, const Gradients& grads, AdamState& state, double lr) {
    require(lr > 0.0, "adam_step: lr must be > 0");
    require(grads.dW.size() == net.layers.size() && grads.db.size() == net.layers.size(),
            "adam_step: gradient count mismatch");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        check_grad_finite(grads.dW[i], "layer " + std::to_string(i) + " weights");
        check_grad_finite(grads.db[i], "layer " + std::to_string(i) + " bias");
    }
    state.t += 1;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        adam_update(net.layers[i].W, grads.dW[i], state.mW[i], state.vW[i], state.hp, state.t, lr);
        adam_update(net.layers[i].b, grads.db[i], state.mb[i], state.vb[i], state.hp, state.t, lr);
    }
}

AdamMatrixState make_adam_state(const Matrix& param, AdamParams hp) {
    AdamMatrixState st;
    st.hp = hp;
    st.m = Matrix::Zero(param.rows(), param.cols());
    st.v = Matrix::Zero(param.rows(), param.cols());
    return st;
}

void adam_step(Matrix& param, const Matrix& grad, AdamMatrixState& state, double lr,
               const std::string& name) {
    require(lr > 0.0, "adam_step: lr must be > 0");
    require_same_shape(param, grad, "adam_step");
    check_grad_finite(grad, name);
    state.t += 1;
    adam_update(param, grad, state.m, state.v, state.hp, state.t, lr);
}

void adam_step_rows(Matrix& param, const Matrix& grad_rows, const std::vector<int>& rows,
                    AdamMatrixState& state, double lr, const std::string& name) {
    require(lr > 0.0, "adam_step_rows: lr must be > 0");
    require(grad_rows.rows() == static_cast<Eigen::Index>(rows.size()) &&
                grad_rows.cols() == param.cols(),
            "adam_step_rows: gradient shape mismatch");
    check_grad_finite(grad_rows, name);
    state.t += 1;
    const AdamParams& hp = state.hp;
    const double bc1 = bias_correct1(hp, state.t);
    const double bc2 = bias_correct2(hp, state.t);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int row = rows[r];
        state.m.row(row) = hp.beta1 * state.m.row(row) + (1.0 - hp.beta1) * grad_rows.row(r);
        state.v.row(row) =
            hp.beta2 * state.v.row(row) +
            (1.0 - hp.beta2) * grad_rows.row(r).cwiseProduct(grad_rows.row(r));
        const Eigen::RowVectorXd m_hat = state.m.row(row) / bc1;
        const Eigen::RowVectorXd v_hat = state.v.row(row) / bc2;
        const Eigen::RowVectorXd denom =
            v_hat.cwiseSqrt() + Eigen::RowVectorXd::Constant(param.cols(), hp.eps);
        param.row(row) -= lr * m_hat.cwiseQuotient(denom);
    }
}

namespace {

// One forward pass giving both the full loss and the ReLU sign pattern.
double eval_loss_and_signs(const DenseNetwork& net, const Matrix& x, const Matrix& target,
                           const Matrix* mask, const LossSpec& loss, std::vector<bool>& signs) {
    ForwardCache cache;
    const Matrix pred = dense_forward(net, x, &cache);
    signs.clear();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].activation != Activation::ReLU) continue;
        const Matrix& pre = cache.pre[i];
        for (Eigen::Index j = 0; j < pre.size(); ++j) signs.push_back(pre(j) > 0.0);
    }
    const double data = loss.kind == LossKind::MaskedMSE ? masked_mse(pred, target, *mask)
                                                         : dense_mse(pred, target);
    return data + l2_penalty(net, loss.l2_weight);
}

}  // namespace

double grad_check(const DenseNetwork& net, const Matrix& x, const Matrix& target,
                  const Matrix* mask, const LossSpec& loss, double h) {
    const Gradients analytic = backprop(net, x, target, mask, loss);
    DenseNetwork probe = net;  // mutated in place for the finite differences

    double max_rel = 0.0;
    std::vector<bool> sp, sm;
    auto probe_param = [&](double* p, double analytic_g) {
        const double orig = *p;
        *p = orig + h;
        const double lp = eval_loss_and_signs(probe, x, target, mask, loss, sp);
        *p = orig - h;
        const double lm = eval_loss_and_signs(probe, x, target, mask, loss, sm);
        *p = orig;
        if (sp != sm) return;  // perturbation straddles a ReLU kink
        const double numeric = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic_g), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic_g - numeric) / denom);
    };

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        DenseLayer& layer = probe.layers[i];
        for (Eigen::Index j = 0; j < layer.W.size(); ++j) {
            probe_param(layer.W.data() + j, analytic.dW[i](j));
        }
        for (Eigen::Index j = 0; j < layer.b.size(); ++j) {
            probe_param(layer.b.data() + j, analytic.db[i](j));
        }
    }
    return max_rel;
}

bool near_relu_kink(const DenseNetwork& net, const Matrix& x, double tol) {
    ForwardCache cache;
    dense_forward(net, x, &cache);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].activation != Activation::ReLU) continue;
        if ((cache.pre[i].array().abs() < tol).any()) return true;
    }
    return false;
}

void check_finite(const DenseNetwork& net, const std::string& context) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].W.allFinite() || !net.layers[i].b.allFinite()) {
            throw NumericalError("non-finite parameters in layer " + std::to_string(i) +
                                     " (" + context + ")",
                                 context);
        }
    }
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t salt1, std::uint64_t salt2) {
    // splitmix64 over (seed, salt1, salt2) so derived streams are independent
    auto mix = [](std::uint64_t& s) {
        s += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t s = seed;
    std::uint64_t a = mix(s);
    s ^= salt1 * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = mix(s);
    s ^= salt2 * 0xc4ceb9fe1a85ec53ULL + 0x9e3779b97f4a7c15ULL;
    std::uint64_t c = mix(s);
    std::seed_seq seq{a, b, c};
    return std::mt19937_64(seq);
}

StepStats chain_step(std::vector<ChainPart>& parts, const Matrix& x, const Matrix& target,
                     const Matrix* mask, LossKind kind, double lr) {
    require(!parts.empty(), "chain_step: empty chain");
    if (kind == LossKind::MaskedMSE) {
        require(mask != nullptr, "chain_step: MaskedMSE requires a mask");
    }

    // forward through every part, keeping caches
    std::vector<ForwardCache> caches(parts.size());
    Matrix cur = x;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        cur = dense_forward(*parts[i].net, cur, &caches[i]);
    }

    StepStats stats;
    Matrix dpred;
    if (kind == LossKind::MaskedMSE) {
        const double count = mask->sum();
        stats.count = count;
        if (count < 1.0) return stats;  // nothing observed in this batch
        const Matrix diff = (cur - target).cwiseProduct(*mask);
        stats.sq_sum = diff.squaredNorm();
        dpred = (2.0 / count) * diff;
    } else {
        const Matrix diff = cur - target;
        stats.count = static_cast<double>(cur.size());
        stats.sq_sum = diff.squaredNorm();
        dpred = (2.0 / stats.count) * diff;
    }

    // backward through the chain, collecting per-part gradients
    std::vector<Gradients> grads(parts.size());
    Matrix delta = dpred;
    for (int i = static_cast<int>(parts.size()) - 1; i >= 0; --i) {
        auto idx = static_cast<std::size_t>(i);
        grads[idx] = zero_gradients(*parts[idx].net);
        delta = backprop_through(*parts[idx].net, caches[idx], delta, grads[idx]);
        add_l2_gradient(*parts[idx].net, parts[idx].l2, grads[idx]);
    }

    for (std::size_t i = 0; i < parts.size(); ++i) {
        adam_step(*parts[i].net, grads[i], *parts[i].adam, lr);
    }
    return stats;
}

Matrix chain_forward(const std::vector<const DenseNetwork*>& parts, const Matrix& x) {
    Matrix cur = x;
    for (const DenseNetwork* p : parts) cur = dense_forward(*p, cur);
    return cur;
}

}  // namespace cdrec
