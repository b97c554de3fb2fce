#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace routelab::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// Named parameter with its gradient buffer; biases are column vectors.
template <class T>
struct ParamRef {
    std::string name;
    Mat<T>* value = nullptr;
    Mat<T>* grad = nullptr;
};

template <class T>
void init_uniform(Mat<T>& w, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> pick(-bound, bound);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<T>(pick(rng));
}

// y = x W^T + b^T broadcast over rows; x is (batch, in).
template <class T>
struct Linear {
    Mat<T> weight, bias;            // (out, in), (out, 1)
    Mat<T> grad_weight, grad_bias;  // same shapes

    Linear() = default;
    Linear(int in, int out, std::mt19937_64& rng) {
        weight.resize(out, in);
        init_uniform(weight, in, rng);
        bias = Mat<T>::Zero(out, 1);
        grad_weight = Mat<T>::Zero(out, in);
        grad_bias = Mat<T>::Zero(out, 1);
    }
    int in_features() const { return static_cast<int>(weight.cols()); }
    int out_features() const { return static_cast<int>(weight.rows()); }

    Mat<T> forward(const Mat<T>& x) const {
        if (x.cols() != weight.cols()) throw std::invalid_argument("Linear: input width mismatch");
        return (x * weight.transpose()).rowwise() + bias.col(0).transpose();
    }
    // accumulates parameter gradients, returns dx
    Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) {
        if (dy.rows() != x.rows() || dy.cols() != weight.rows())
            throw std::invalid_argument("Linear: grad shape mismatch");
        grad_weight.noalias() += dy.transpose() * x;
        grad_bias.col(0).noalias() += dy.colwise().sum().transpose();
        return dy * weight;
    }
    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight, &grad_weight});
        out.push_back({prefix + ".bias", &bias, &grad_bias});
    }
    void zero_grad() {
        grad_weight.setZero();
        grad_bias.setZero();
    }
};

template <class T>
Mat<T> leaky_relu(const Mat<T>& x, T slope = static_cast<T>(0.01)) {
    return x.unaryExpr([slope](T v) { return v >= T(0) ? v : slope * v; });
}

template <class T>
Mat<T> leaky_relu_backward(const Mat<T>& x, const Mat<T>& dy, T slope = static_cast<T>(0.01)) {
    if (x.rows() != dy.rows() || x.cols() != dy.cols())
        throw std::invalid_argument("leaky_relu_backward: shape mismatch");
    return dy.binaryExpr(x, [slope](T g, T v) { return v >= T(0) ? g : slope * g; });
}

// Dense stack with Leaky ReLU after every layer (activate_last) or after all
// but the last one.
template <class T>
struct Mlp {
    std::vector<Linear<T>> layers;
    T slope = static_cast<T>(0.01);
    bool activate_last = true;

    struct Cache {
        std::vector<Mat<T>> inputs;   // input to each layer
        std::vector<Mat<T>> preacts;  // pre-activation output of each layer
    };

    Mlp() = default;
    Mlp(const std::vector<int>& dims, bool act_last, std::mt19937_64& rng) : activate_last(act_last) {
        if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
        for (size_t i = 0; i + 1 < dims.size(); ++i) {
            layers.emplace_back(dims[i], dims[i + 1], rng);
            // Kaiming bound for layers feeding a Leaky ReLU keeps activation
            // variance from collapsing through the stack.
            if (i + 2 < dims.size() || act_last)
                layers.back().weight *= static_cast<T>(std::sqrt(6.0));
        }
    }

    Mat<T> forward(const Mat<T>& x, Cache* cache = nullptr) const {
        Mat<T> cur = x;
        if (cache) {
            cache->inputs.clear();
            cache->preacts.clear();
        }
        for (size_t i = 0; i < layers.size(); ++i) {
            if (cache) cache->inputs.push_back(cur);
            Mat<T> pre = layers[i].forward(cur);
            if (cache) cache->preacts.push_back(pre);
            const bool act = activate_last || i + 1 < layers.size();
            cur = act ? leaky_relu(pre, slope) : std::move(pre);
        }
        return cur;
    }
    Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
        Mat<T> d = dy;
        for (size_t i = layers.size(); i-- > 0;) {
            const bool act = activate_last || i + 1 < layers.size();
            if (act) d = leaky_relu_backward(cache.preacts[i], d, slope);
            d = layers[i].backward(cache.inputs[i], d);
        }
        return d;
    }
    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        for (size_t i = 0; i < layers.size(); ++i)
            layers[i].collect(out, prefix + ".l" + std::to_string(i));
    }
    void zero_grad() {
        for (auto& l : layers) l.zero_grad();
    }
};

// Single LSTM cell over row batches. Gates are stored stacked [i; f; g; o] in
// one input matrix, one recurrent matrix and one bias; forget bias starts at 1.
template <class T>
struct LstmCell {
    Mat<T> w_input, w_recur, bias;  // (4H, in), (4H, H), (4H, 1)
    Mat<T> grad_w_input, grad_w_recur, grad_bias;
    int input_size = 0, state_size = 0;

    struct Cache {
        Mat<T> x, h_prev, c_prev;
        Mat<T> gi, gf, gg, go;  // post-nonlinearity gate values
        Mat<T> c, tanh_c;
    };

    LstmCell() = default;
    LstmCell(int in, int state, std::mt19937_64& rng) : input_size(in), state_size(state) {
        w_input.resize(4 * state, in);
        init_uniform(w_input, in, rng);
        w_recur.resize(4 * state, state);
        init_uniform(w_recur, state, rng);
        bias = Mat<T>::Zero(4 * state, 1);
        bias.block(state, 0, state, 1).setConstant(T(1));  // forget gate
        grad_w_input = Mat<T>::Zero(4 * state, in);
        grad_w_recur = Mat<T>::Zero(4 * state, state);
        grad_bias = Mat<T>::Zero(4 * state, 1);
    }

    static Mat<T> sigmoid(const Mat<T>& x) {
        return x.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
    }

    void forward(const Mat<T>& x, const Mat<T>& h_prev, const Mat<T>& c_prev, Mat<T>& h_out,
                 Mat<T>& c_out, Cache* cache = nullptr) const {
        if (x.cols() != input_size || h_prev.cols() != state_size || c_prev.cols() != state_size ||
            x.rows() != h_prev.rows() || x.rows() != c_prev.rows())
            throw std::invalid_argument("LstmCell: shape mismatch");
        const int s = state_size;
        Mat<T> pre = x * w_input.transpose() + h_prev * w_recur.transpose();
        pre.rowwise() += bias.col(0).transpose();
        Mat<T> gi = sigmoid(pre.leftCols(s));
        Mat<T> gf = sigmoid(pre.middleCols(s, s));
        Mat<T> gg = pre.middleCols(2 * s, s).array().tanh().matrix();
        Mat<T> go = sigmoid(pre.rightCols(s));
        c_out = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
        Mat<T> tc = c_out.array().tanh().matrix();
        h_out = go.cwiseProduct(tc);
        if (cache) {
            cache->x = x;
            cache->h_prev = h_prev;
            cache->c_prev = c_prev;
            cache->gi = std::move(gi);
            cache->gf = std::move(gf);
            cache->gg = std::move(gg);
            cache->go = std::move(go);
            cache->c = c_out;
            cache->tanh_c = std::move(tc);
        }
    }

    // dh, dc are upstream gradients on (h_out, c_out); adds into dx, dh_prev,
    // dc_prev (callers pass zeroed or accumulating buffers) and parameter grads.
    void backward(const Cache& k, const Mat<T>& dh, const Mat<T>& dc, Mat<T>& dx, Mat<T>& dh_prev,
                  Mat<T>& dc_prev) {
        const int s = state_size;
        const Eigen::Index b = k.x.rows();
        // through h = go * tanh(c)
        Mat<T> dgo = dh.cwiseProduct(k.tanh_c);
        Mat<T> dct = dc + dh.cwiseProduct(k.go).cwiseProduct(
                              (T(1) - k.tanh_c.array().square()).matrix());
        // through c = gf*c_prev + gi*gg
        Mat<T> dgf = dct.cwiseProduct(k.c_prev);
        Mat<T> dgi = dct.cwiseProduct(k.gg);
        Mat<T> dgg = dct.cwiseProduct(k.gi);
        dc_prev += dct.cwiseProduct(k.gf);
        // gate nonlinearities
        Mat<T> dpre(b, 4 * s);
        dpre.leftCols(s) = dgi.cwiseProduct(k.gi).cwiseProduct((T(1) - k.gi.array()).matrix());
        dpre.middleCols(s, s) =
            dgf.cwiseProduct(k.gf).cwiseProduct((T(1) - k.gf.array()).matrix());
        dpre.middleCols(2 * s, s) =
            dgg.cwiseProduct((T(1) - k.gg.array().square()).matrix());
        dpre.rightCols(s) = dgo.cwiseProduct(k.go).cwiseProduct((T(1) - k.go.array()).matrix());
        grad_w_input.noalias() += dpre.transpose() * k.x;
        grad_w_recur.noalias() += dpre.transpose() * k.h_prev;
        grad_bias.col(0).noalias() += dpre.colwise().sum().transpose();
        dx += dpre * w_input;
        dh_prev += dpre * w_recur;
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".w_input", &w_input, &grad_w_input});
        out.push_back({prefix + ".w_recur", &w_recur, &grad_w_recur});
        out.push_back({prefix + ".bias", &bias, &grad_bias});
    }
    void zero_grad() {
        grad_w_input.setZero();
        grad_w_recur.setZero();
        grad_bias.setZero();
    }
};

template <class T>
T mse_loss(const Mat<T>& pred, const Mat<T>& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("mse_loss: shape mismatch");
    return (pred - target).array().square().sum() / static_cast<T>(pred.size());
}

template <class T>
Mat<T> mse_backward(const Mat<T>& pred, const Mat<T>& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("mse_backward: shape mismatch");
    return (pred - target) * (T(2) / static_cast<T>(pred.size()));
}

template <class T>
void zero_grads(std::vector<ParamRef<T>>& params) {
    for (auto& p : params) p.grad->setZero();
}

// Scales all gradients so their joint L2 norm is at most max_norm; returns the
// pre-clip norm.
template <class T>
double clip_global_norm(std::vector<ParamRef<T>>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) sq += static_cast<double>(p.grad->template cast<double>().squaredNorm());
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto& p : params) *p.grad *= scale;
    }
    return norm;
}

// Decoupled weight-decay Adam with bias correction. A step with any non-finite
// gradient is skipped entirely and reported through the return value.
template <class T>
class AdamW {
public:
    struct Config {
        double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 1e-2;
    };

    AdamW(std::vector<ParamRef<T>> params, Config cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            m_.push_back(Mat<T>::Zero(p.value->rows(), p.value->cols()));
            v_.push_back(Mat<T>::Zero(p.value->rows(), p.value->cols()));
        }
    }

    bool step() {
        for (const auto& p : params_)
            if (!p.grad->allFinite()) return false;
        ++t_;
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        const T corr1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
        const T corr2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
        const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
        const T wd = static_cast<T>(cfg_.weight_decay);
        for (size_t i = 0; i < params_.size(); ++i) {
            const Mat<T>& g = *params_[i].grad;
            m_[i] = b1 * m_[i] + (T(1) - b1) * g;
            v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
            Mat<T>& w = *params_[i].value;
            w -= lr * wd * w;
            w.array() -= lr * (m_[i].array() / corr1) /
                         ((v_[i].array() / corr2).sqrt() + eps);
        }
        return true;
    }

    long long step_count() const { return t_; }
    const Config& config() const { return cfg_; }

private:
    std::vector<ParamRef<T>> params_;
    std::vector<Mat<T>> m_, v_;
    Config cfg_;
    long long t_ = 0;
};

// Central-difference probe of analytic gradients. eval(true) must zero grads,
// run forward+backward and return the loss; eval(false) only the loss. Returns
// the max relative error over probed coordinates. denom_floor guards the
// division for near-zero gradients, where finite differences are all roundoff.
template <class T>
double grad_check(std::vector<ParamRef<T>>& params, const std::function<T(bool)>& eval, int probes,
                  T eps, std::mt19937_64& rng, double denom_floor = 1e-8) {
    eval(true);
    std::vector<Mat<T>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(*p.grad);
    std::uniform_int_distribution<size_t> pick_param(0, params.size() - 1);
    double worst = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
        const size_t pi = pick_param(rng);
        Mat<T>& w = *params[pi].value;
        std::uniform_int_distribution<Eigen::Index> pick_ix(0, w.size() - 1);
        const Eigen::Index ix = pick_ix(rng);
        const T saved = w.data()[ix];
        w.data()[ix] = saved + eps;
        const double up = static_cast<double>(eval(false));
        w.data()[ix] = saved - eps;
        const double down = static_cast<double>(eval(false));
        w.data()[ix] = saved;
        const double numeric = (up - down) / (2.0 * static_cast<double>(eps));
        const double analytic = static_cast<double>(grads[pi].data()[ix]);
        const double denom = std::max({std::abs(numeric), std::abs(analytic), denom_floor});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
    return worst;
}

// Checkpoint container: versioned named-array file, exact round trip.
void save_params_file(const std::string& path, const std::vector<ParamRef<float>>& params,
                      const std::string& metadata);
std::string load_params_file(const std::string& path, std::vector<ParamRef<float>>& params);
std::string read_params_metadata(const std::string& path);

}  // namespace routelab::nn
