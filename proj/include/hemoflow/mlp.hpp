#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "hemoflow/errors.hpp"
#include "hemoflow/rng.hpp"

namespace hemo {

using Eigen::ArrayXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fully connected net shape: 4 inputs (x, y, z, t), `hidden_layers` Swish
/// layers of `width` neurons, 4 linear outputs (u, v, w, p).
struct NetworkArchitecture {
    int hidden_layers = 6;
    int width = 256;

    void validate() const {
        require(hidden_layers >= 1, errc::config, "network needs at least one hidden layer");
        require(width >= 1, errc::config, "network width must be positive");
    }
};

inline int parameter_count(const NetworkArchitecture& a) {
    a.validate();
    int first = a.width * 4 + a.width;
    int mid = (a.hidden_layers - 1) * (a.width * a.width + a.width);
    int last = 4 * a.width + 4;
    return first + mid + last;
}

/// Columns per point in jet state matrices: value, 4 gradient entries and the
/// 10 packed second derivatives.
inline constexpr Index kJetCols = 15;

/// Multilayer perceptron over a flat parameter vector. Two evaluation paths:
/// a plain value forward/backward for data losses, and a "jet" path that
/// pushes second-order Taylor state through every layer, yielding exact
/// input derivatives per point and, in reverse, the parameter gradient of any
/// functional of those derivatives. Both paths are batched as GEMMs.
class Mlp {
  public:
    explicit Mlp(NetworkArchitecture arch) : arch_(arch) {
        arch_.validate();
        theta_ = VectorXd::Zero(hemo::parameter_count(arch_));
        int L = arch_.hidden_layers;
        off_w_.resize(L + 1);
        off_b_.resize(L + 1);
        int off = 0;
        for (int l = 0; l <= L; ++l) {
            off_w_[l] = off;
            off += rows(l) * cols(l);
            off_b_[l] = off;
            off += rows(l);
        }
    }

    /// He-normal weights, std = sqrt(2 / fan_in), zero biases; layer streams
    /// are derived from the seed so the draw order is reproducible.
    static Mlp kaiming_init(NetworkArchitecture arch, std::uint64_t seed) {
        Mlp net(arch);
        for (int l = 0; l <= arch.hidden_layers; ++l) {
            Rng rng(mix_seed(seed, 0x6e657457, l));
            double std_dev = std::sqrt(2.0 / net.cols(l));
            double* w = net.theta_.data() + net.off_w_[l];
            for (int i = 0; i < net.rows(l) * net.cols(l); ++i) w[i] = std_dev * rng.normal();
        }
        return net;
    }

    const NetworkArchitecture& arch() const { return arch_; }
    int parameter_count() const { return static_cast<int>(theta_.size()); }
    VectorXd& params() { return theta_; }
    const VectorXd& params() const { return theta_; }

    int rows(int l) const { return l == arch_.hidden_layers ? 4 : arch_.width; }
    int cols(int l) const { return l == 0 ? 4 : arch_.width; }

    Eigen::Map<const RowMat> weight(int l) const {
        return {theta_.data() + off_w_[l], rows(l), cols(l)};
    }
    Eigen::Map<const VectorXd> bias(int l) const { return {theta_.data() + off_b_[l], rows(l)}; }

    struct Cache {
        std::vector<MatrixXd> a;  // a[0] = input, a[l+1] = hidden activation
        std::vector<MatrixXd> z;  // z[l] = pre-activation of hidden layer l
        MatrixXd y;
        MatrixXd delta, delta_prev;
        ArrayXd s, f1;
    };

    /// X is 4 x B; returns cache.y (4 x B).
    const MatrixXd& forward(const Eigen::Ref<const MatrixXd>& X, Cache& c) const {
        int L = arch_.hidden_layers;
        c.a.resize(L + 1);
        c.z.resize(L);
        c.a[0] = X;
        for (int l = 0; l < L; ++l) {
            c.z[l].noalias() = weight(l) * c.a[l];
            c.z[l].colwise() += bias(l);
            swish_batch(c.z[l], c.a[l + 1], c.s, c.f1);
        }
        c.y.noalias() = weight(L) * c.a[L];
        c.y.colwise() += bias(L);
        return c.y;
    }

    /// Accumulates d(loss)/d(theta) into grad given dY = d(loss)/d(output).
    void backward(Cache& c, const Eigen::Ref<const MatrixXd>& dY, VectorXd& grad) const {
        int L = arch_.hidden_layers;
        c.delta = dY;
        for (int l = L; l >= 0; --l) {
            grad_w(grad, l).noalias() += c.delta * c.a[l].transpose();
            grad_b(grad, l).noalias() += c.delta.rowwise().sum();
            if (l == 0) break;
            c.delta_prev.noalias() = weight(l).transpose() * c.delta;
            // multiply by swish'(z) of the layer below
            const MatrixXd& z = c.z[l - 1];
            for (Index j = 0; j < z.cols(); ++j) {
                c.s = inv_logit(z.col(j).array());
                c.delta_prev.col(j).array() *=
                    c.s + z.col(j).array() * (c.s * (1.0 - c.s));
            }
            std::swap(c.delta, c.delta_prev);
        }
    }

    struct JetCache {
        std::vector<MatrixXd> a;  // jet states, rows = layer width, cols = 15 B
        std::vector<MatrixXd> z;
        MatrixXd y;
        MatrixXd delta, delta_prev;
        ArrayXd s, s1, s2, f1, f2, f3, g;
    };

    /// Second-order forward: Xstate packs per point the input jet
    /// [value | d/dx_i | d2/dx_i dx_j]; all derivative bookkeeping flows
    /// through the same affine GEMMs plus a per-point activation rule.
    const MatrixXd& jet_forward(const Eigen::Ref<const MatrixXd>& Xstate, JetCache& c) const {
        require(Xstate.cols() % kJetCols == 0, errc::config, "bad jet state width");
        Index B = Xstate.cols() / kJetCols;
        jet_points_evaluated_ += static_cast<std::uint64_t>(B);
        int L = arch_.hidden_layers;
        c.a.resize(L + 1);
        c.z.resize(L);
        c.a[0] = Xstate;
        for (int l = 0; l < L; ++l) {
            c.z[l].noalias() = weight(l) * c.a[l];
            for (Index p = 0; p < B; ++p) c.z[l].col(kJetCols * p) += bias(l);
            jet_activation(c.z[l], c.a[l + 1], B, c);
        }
        c.y.noalias() = weight(L) * c.a[L];
        for (Index p = 0; p < B; ++p) c.y.col(kJetCols * p) += bias(L);
        return c.y;
    }

    /// Reverse sweep of jet_forward: dYstate holds adjoints of every output
    /// jet coefficient; the parameter gradient lands in grad.
    void jet_backward(JetCache& c, const Eigen::Ref<const MatrixXd>& dYstate,
                      VectorXd& grad) const {
        int L = arch_.hidden_layers;
        Index B = dYstate.cols() / kJetCols;
        c.delta = dYstate;
        for (int l = L; l >= 0; --l) {
            grad_w(grad, l).noalias() += c.delta * c.a[l].transpose();
            auto gb = grad_b(grad, l);
            for (Index p = 0; p < B; ++p) gb += c.delta.col(kJetCols * p);
            if (l == 0) break;
            c.delta_prev.noalias() = weight(l).transpose() * c.delta;
            jet_activation_adjoint(c.z[l - 1], c.delta_prev, c.delta, B, c);
        }
    }

    /// Number of points that went through the second-order path; stage-1
    /// training must leave this untouched.
    std::uint64_t jet_points_evaluated() const { return jet_points_evaluated_; }
    void reset_jet_counter() const { jet_points_evaluated_ = 0; }

  private:
    static ArrayXd inv_logit(const Eigen::Ref<const ArrayXd>& z) {
        return 1.0 / (1.0 + (-z).exp());
    }

    Eigen::Map<RowMat> grad_w(VectorXd& g, int l) const {
        return {g.data() + off_w_[l], rows(l), cols(l)};
    }
    Eigen::Map<VectorXd> grad_b(VectorXd& g, int l) const {
        return {g.data() + off_b_[l], rows(l)};
    }

    static void swish_batch(const MatrixXd& z, MatrixXd& a, ArrayXd& s, ArrayXd& f1) {
        a.resizeLike(z);
        for (Index j = 0; j < z.cols(); ++j) {
            s = 1.0 / (1.0 + (-z.col(j).array()).exp());
            a.col(j) = z.col(j).array() * s;
            (void)f1;
        }
    }

    /// Per point: a0 = f(z0), a_i = f'(z0) z_i, a_ij = f'(z0) z_ij +
    /// f''(z0) z_i z_j, where f is Swish and indices address jet columns.
    void jet_activation(const MatrixXd& z, MatrixXd& a, Index B, JetCache& c) const {
        a.resizeLike(z);
        for (Index p = 0; p < B; ++p) {
            Index base = kJetCols * p;
            auto z0 = z.col(base).array();
            c.s = 1.0 / (1.0 + (-z0).exp());
            c.s1 = c.s * (1.0 - c.s);
            c.s2 = c.s1 * (1.0 - 2.0 * c.s);
            c.f1 = c.s + z0 * c.s1;
            c.f2 = 2.0 * c.s1 + z0 * c.s2;
            a.col(base) = z0 * c.s;
            for (int i = 0; i < 4; ++i)
                a.col(base + 1 + i) = c.f1 * z.col(base + 1 + i).array();
            int k = 0;
            for (int i = 0; i < 4; ++i)
                for (int j = i; j < 4; ++j, ++k)
                    a.col(base + 5 + k) = c.f1 * z.col(base + 5 + k).array() +
                                          c.f2 * z.col(base + 1 + i).array() *
                                              z.col(base + 1 + j).array();
        }
    }

    /// Adjoint of jet_activation: turns d(loss)/d(a-state) into
    /// d(loss)/d(z-state) in place (din -> dout).
    void jet_activation_adjoint(const MatrixXd& z, const MatrixXd& da, MatrixXd& dz, Index B,
                                JetCache& c) const {
        dz.resizeLike(da);
        for (Index p = 0; p < B; ++p) {
            Index base = kJetCols * p;
            auto z0 = z.col(base).array();
            c.s = 1.0 / (1.0 + (-z0).exp());
            c.s1 = c.s * (1.0 - c.s);
            c.s2 = c.s1 * (1.0 - 2.0 * c.s);
            ArrayXd s3 = c.s2 * (1.0 - 2.0 * c.s) - 2.0 * c.s1 * c.s1;
            c.f1 = c.s + z0 * c.s1;
            c.f2 = 2.0 * c.s1 + z0 * c.s2;
            c.f3 = 3.0 * c.s2 + z0 * s3;

            // dz0 accumulates value, gradient and Hessian channel feedback
            c.g = da.col(base).array() * c.f1;
            for (int i = 0; i < 4; ++i)
                c.g += da.col(base + 1 + i).array() * c.f2 * z.col(base + 1 + i).array();
            int k = 0;
            for (int i = 0; i < 4; ++i)
                for (int j = i; j < 4; ++j, ++k)
                    c.g += da.col(base + 5 + k).array() *
                           (c.f2 * z.col(base + 5 + k).array() +
                            c.f3 * z.col(base + 1 + i).array() * z.col(base + 1 + j).array());
            dz.col(base) = c.g;

            for (int i = 0; i < 4; ++i)
                dz.col(base + 1 + i) = da.col(base + 1 + i).array() * c.f1;
            k = 0;
            for (int i = 0; i < 4; ++i)
                for (int j = i; j < 4; ++j, ++k) {
                    auto dak = da.col(base + 5 + k).array();
                    dz.col(base + 1 + i).array() += dak * c.f2 * z.col(base + 1 + j).array();
                    dz.col(base + 1 + j).array() += dak * c.f2 * z.col(base + 1 + i).array();
                    dz.col(base + 5 + k) = dak * c.f1;
                }
        }
    }

    NetworkArchitecture arch_;
    VectorXd theta_;
    std::vector<int> off_w_, off_b_;
    mutable std::uint64_t jet_points_evaluated_ = 0;
};

}  // namespace hemo
