#include "satbo/bo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace satbo::bo {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Hyperparameter boxes for the marginal-likelihood ascent, in variance space
// for signal and noise. A lengthscale cap near the cube diameter keeps ARD
// from flattening dimensions it has no evidence about, and the noise floor
// keeps the posterior honestly fuzzy at observed points.
constexpr double kLenLo = 0.005, kLenHi = 2.0;
constexpr double kSig2Lo = 0.05, kSig2Hi = 20.0;
constexpr double kNoise2Lo = 5e-4, kNoise2Hi = 0.2;

MatrixXd to_matrix(const std::vector<std::vector<double>>& X) {
    MatrixXd m(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(X[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = X[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

// exp(-1/2 * squared distance) between rows of A and B after scaling each
// dimension by its lengthscale.
MatrixXd se_kernel(const MatrixXd& A, const MatrixXd& B, const VectorXd& len) {
    const MatrixXd As = A * len.cwiseInverse().asDiagonal();
    const MatrixXd Bs = B * len.cwiseInverse().asDiagonal();
    MatrixXd d2 = As.rowwise().squaredNorm() * Eigen::RowVectorXd::Ones(Bs.rows()) +
                  VectorXd::Ones(As.rows()) * Bs.rowwise().squaredNorm().transpose() -
                  2.0 * As * Bs.transpose();
    return (-0.5 * d2.cwiseMax(0.0)).array().exp();
}

// Cholesky with escalating jitter; throws only if the matrix refuses to be
// positive definite at any reasonable regularization.
Eigen::LLT<MatrixXd> robust_llt(const MatrixXd& K) {
    double jitter = 0.0;
    for (int attempt = 0; attempt < 10; ++attempt) {
        MatrixXd Kj = K;
        if (jitter > 0.0) Kj.diagonal().array() += jitter;
        Eigen::LLT<MatrixXd> llt(Kj);
        if (llt.info() == Eigen::Success) return llt;
        jitter = jitter == 0.0 ? 1e-12 : jitter * 100.0;
    }
    throw std::runtime_error("covariance matrix is not positive definite");
}

}  // namespace

GpModel GpModel::fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    return fit(X, y, FitOptions{});
}

GpModel GpModel::fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                     const FitOptions& opt) {
    if (X.empty() || X.size() != y.size())
        throw std::invalid_argument("gp fit needs matching, non-empty points and values");
    const std::size_t dim = X[0].size();
    if (dim == 0) throw std::invalid_argument("gp fit needs at least one dimension");
    for (const auto& row : X)
        if (row.size() != dim) throw std::invalid_argument("gp points must share one dimension");

    GpModel model;
    model.dim_ = static_cast<int>(dim);
    model.X_ = X;

    const auto n = static_cast<Eigen::Index>(X.size());
    VectorXd z(n);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / static_cast<double>(y.size()));
    if (sd < 1e-12) sd = 1.0;
    model.y_mean_ = mean;
    model.y_std_ = sd;
    for (Eigen::Index i = 0; i < n; ++i) z(i) = (y[static_cast<std::size_t>(i)] - mean) / sd;

    const MatrixXd Xm = to_matrix(X);
    const bool learn_noise = opt.noise_variance < 0.0;

    // Log-space hyperparameters: lengthscales, signal std, noise std.
    VectorXd log_len = VectorXd::Constant(static_cast<Eigen::Index>(dim), std::log(0.5));
    double log_sig = 0.0;
    double log_noise = 0.5 * std::log(learn_noise ? 5e-3 : std::max(opt.noise_variance, 0.0) + 1e-300);
    const GpModel* warm = opt.warm_start;
    if (warm != nullptr && warm->dim_ == model.dim_) {
        for (std::size_t d = 0; d < dim; ++d)
            log_len(static_cast<Eigen::Index>(d)) = std::log(warm->lengthscales_[d]);
        log_sig = 0.5 * std::log(warm->signal_variance_);
        if (learn_noise) log_noise = 0.5 * std::log(std::clamp(warm->noise_variance_, kNoise2Lo, kNoise2Hi));
    }
    if (!learn_noise) log_noise = 0.5 * std::log(std::max(opt.noise_variance, 1e-300));

    // Adam ascent on the log marginal likelihood.
    const int num_params = static_cast<int>(dim) + 1 + (learn_noise ? 1 : 0);
    VectorXd m_acc = VectorXd::Zero(num_params), v_acc = VectorXd::Zero(num_params);
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    for (int iter = 1; iter <= opt.iters; ++iter) {
        const VectorXd len = log_len.array().exp();
        const double sig2 = std::exp(2.0 * log_sig);
        const double noise2 = std::max(std::exp(2.0 * log_noise), learn_noise ? kNoise2Lo : 0.0);

        const MatrixXd Kse = se_kernel(Xm, Xm, len);
        MatrixXd K = sig2 * Kse;
        K.diagonal().array() += noise2;
        const Eigen::LLT<MatrixXd> llt = robust_llt(K);
        const VectorXd alpha = llt.solve(z);
        const MatrixXd Kinv = llt.solve(MatrixXd::Identity(n, n));

        // d logML / d theta_j = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta_j)
        const MatrixXd M = (alpha * alpha.transpose() - Kinv).cwiseProduct(sig2 * Kse);
        const MatrixXd Xs = Xm * len.cwiseInverse().asDiagonal();
        const VectorXd rs = M.rowwise().sum();
        const MatrixXd R = M * Xs;
        VectorXd grad(num_params);
        // Per-dimension: sum_ij M_ij (xs_id - xs_jd)^2 = 2(rs.x_d^2 - x_d.M x_d)
        grad.head(static_cast<Eigen::Index>(dim)) =
            (Xs.array().square().colwise() * rs.array()).colwise().sum().transpose() -
            (Xs.array() * R.array()).colwise().sum().transpose();
        grad(static_cast<Eigen::Index>(dim)) = M.sum();  // d/dlog sig: 2 sig2 Kse, halved
        if (learn_noise)
            grad(num_params - 1) = noise2 * (alpha.squaredNorm() - Kinv.trace());

        m_acc = b1 * m_acc + (1.0 - b1) * grad;
        v_acc = b2 * v_acc + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, iter), c2 = 1.0 - std::pow(b2, iter);
        const VectorXd step =
            lr * (m_acc / c1).cwiseQuotient(((v_acc / c2).cwiseSqrt().array() + adam_eps).matrix());

        log_len += step.head(static_cast<Eigen::Index>(dim));
        log_sig += step(static_cast<Eigen::Index>(dim));
        if (learn_noise) log_noise += step(num_params - 1);

        log_len = log_len.cwiseMax(std::log(kLenLo)).cwiseMin(std::log(kLenHi));
        log_sig = std::clamp(log_sig, 0.5 * std::log(kSig2Lo), 0.5 * std::log(kSig2Hi));
        if (learn_noise)
            log_noise = std::clamp(log_noise, 0.5 * std::log(kNoise2Lo), 0.5 * std::log(kNoise2Hi));
    }

    // Freeze the fitted kernel: factor once, cache the pieces predictions use.
    const VectorXd len = log_len.array().exp();
    model.lengthscales_.assign(len.data(), len.data() + len.size());
    model.signal_variance_ = std::exp(2.0 * log_sig);
    model.noise_variance_ = learn_noise ? std::max(std::exp(2.0 * log_noise), kNoise2Lo)
                                        : std::max(opt.noise_variance, 0.0);

    MatrixXd K = model.signal_variance_ * se_kernel(Xm, Xm, len);
    K.diagonal().array() += model.noise_variance_;
    const Eigen::LLT<MatrixXd> llt = robust_llt(K);
    const MatrixXd L = llt.matrixL();
    model.chol_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            model.chol_[static_cast<std::size_t>(i * n + j)] = L(i, j);
    const VectorXd alpha = llt.solve(z);
    model.alpha_.assign(alpha.data(), alpha.data() + alpha.size());
    model.y_.assign(z.data(), z.data() + z.size());
    return model;
}

GpModel::Prediction GpModel::predict(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("prediction point has the wrong dimension");
    const auto n = static_cast<Eigen::Index>(X_.size());
    VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double d2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
            const double t = (x[static_cast<std::size_t>(d)] -
                              X_[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]) /
                             lengthscales_[static_cast<std::size_t>(d)];
            d2 += t * t;
        }
        k(i) = signal_variance_ * std::exp(-0.5 * d2);
    }
    Prediction out;
    for (Eigen::Index i = 0; i < n; ++i) out.mean += k(i) * alpha_[static_cast<std::size_t>(i)];

    // v = L^-1 k by forward substitution on the cached factor.
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = k(i);
        for (Eigen::Index j = 0; j < i; ++j)
            s -= chol_[static_cast<std::size_t>(i * n + j)] * v(j);
        v(i) = s / chol_[static_cast<std::size_t>(i * n + i)];
    }
    out.variance = std::max(signal_variance_ - v.squaredNorm(), 0.0);
    return out;
}

std::vector<double> GpModel::sample_joint(const std::vector<std::vector<double>>& candidates,
                                          Rng& rng) const {
    if (candidates.empty()) throw std::invalid_argument("joint sample needs candidates");
    const auto n = static_cast<Eigen::Index>(X_.size());
    const auto m = static_cast<Eigen::Index>(candidates.size());
    const VectorXd len =
        Eigen::Map<const VectorXd>(lengthscales_.data(), static_cast<Eigen::Index>(dim_));
    const MatrixXd Xm = to_matrix(X_);
    const MatrixXd Cm = to_matrix(candidates);

    const MatrixXd Kxc = signal_variance_ * se_kernel(Xm, Cm, len);  // n x m
    MatrixXd Kcc = signal_variance_ * se_kernel(Cm, Cm, len);        // m x m

    const Eigen::Map<const RowMajor> L(chol_.data(), n, n);
    const MatrixXd V = L.triangularView<Eigen::Lower>().solve(Kxc);  // n x m
    const Eigen::Map<const VectorXd> alpha(alpha_.data(), n);

    const VectorXd mu = Kxc.transpose() * alpha;
    MatrixXd cov = Kcc - V.transpose() * V;
    cov.diagonal().array() += 1e-8 * signal_variance_;
    const Eigen::LLT<MatrixXd> llt = robust_llt(cov);

    VectorXd zdraw(m);
    for (Eigen::Index j = 0; j < m; ++j) zdraw(j) = rng.normal();
    const VectorXd sample = mu + MatrixXd(llt.matrixL()) * zdraw;
    return {sample.data(), sample.data() + sample.size()};
}

std::vector<double> point_of(const cnf::Assignment& s) {
    if (!s.complete()) throw std::invalid_argument("only complete assignments embed as points");
    std::vector<double> x(static_cast<std::size_t>(s.num_vars()));
    for (int v = 1; v <= s.num_vars(); ++v)
        x[static_cast<std::size_t>(v - 1)] = s[v] == cnf::Value::True ? 1.0 : 0.0;
    return x;
}

namespace {

// Append (point, value), collapsing onto an existing identical point and
// keeping the larger value.
void absorb(std::vector<Observation>& obs, std::vector<double> point, double value) {
    for (auto& o : obs) {
        if (o.point == point) {
            o.value = std::max(o.value, value);
            return;
        }
    }
    obs.push_back({std::move(point), value});
}

void refresh_incumbent(BoState& state) {
    const Observation* best = nullptr;
    for (const auto& o : state.observations)
        if (best == nullptr || o.value > best->value) best = &o;
    state.best_value = best->value;
    state.best_point = best->point;
}

}  // namespace

BoState init_ci(const dpll::SampleSet& S, const std::vector<double>& f, const BoParams& params) {
    if (S.empty()) throw std::invalid_argument("confidence interval needs at least one sample");
    if (S.size() != f.size())
        throw std::invalid_argument("samples and coverages must pair up");
    BoState state;
    state.params = params;
    state.tr_length = params.l_init;
    state.rng = Rng(params.seed);
    for (std::size_t i = 0; i < S.size(); ++i) absorb(state.observations, point_of(S[i]), f[i]);
    refresh_incumbent(state);
    state.l_trace.push_back(state.tr_length);
    return state;
}

dpll::WeightVector suggest_prefer(BoState& state) {
    if (state.observations.empty()) throw std::logic_error("suggest called before init");
    const std::size_t dim = state.best_point.size();

    std::vector<double> lo(dim), hi(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        lo[d] = std::max(0.0, state.best_point[d] - state.tr_length / 2.0);
        hi[d] = std::min(1.0, state.best_point[d] + state.tr_length / 2.0);
    }

    bool degenerate = state.observations.size() < 2;
    if (!degenerate) {
        const double v0 = state.observations.front().value;
        degenerate = std::all_of(state.observations.begin(), state.observations.end(),
                                 [&](const Observation& o) { return o.value == v0; });
    }

    dpll::WeightVector delta(dim);
    if (degenerate) {
        // No signal to model: uniform draw from the trust region.
        for (std::size_t d = 0; d < dim; ++d)
            delta[d] = std::clamp(state.rng.uniform(lo[d], hi[d]), 0.01, 0.99);
        return delta;
    }

    std::vector<std::vector<double>> X;
    std::vector<double> y;
    X.reserve(state.observations.size());
    y.reserve(state.observations.size());
    for (const auto& o : state.observations) {
        X.push_back(o.point);
        y.push_back(o.value);
    }
    GpModel::FitOptions fo;
    fo.iters = state.params.fit_iters;
    fo.warm_start = state.surrogate_ready ? &state.surrogate : nullptr;
    state.surrogate = GpModel::fit(X, y, fo);
    state.surrogate_ready = true;

    std::vector<std::vector<double>> candidates(
        static_cast<std::size_t>(state.params.num_candidates), std::vector<double>(dim));
    for (auto& c : candidates)
        for (std::size_t d = 0; d < dim; ++d) c[d] = state.rng.uniform(lo[d], hi[d]);

    const std::vector<double> draw = state.surrogate.sample_joint(candidates, state.rng);
    std::size_t best = 0;
    for (std::size_t j = 1; j < draw.size(); ++j)
        if (draw[j] > draw[best]) best = j;

    for (std::size_t d = 0; d < dim; ++d) delta[d] = std::clamp(candidates[best][d], 0.01, 0.99);
    return delta;
}

void update_ci(BoState& state, const dpll::SampleSet& S, const std::vector<double>& f) {
    if (S.size() != f.size())
        throw std::invalid_argument("samples and coverages must pair up");
    double round_best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < S.size(); ++i) {
        absorb(state.observations, point_of(S[i]), f[i]);
        round_best = std::max(round_best, f[i]);
    }

    const bool improved = !S.empty() && round_best > state.best_value;
    if (improved) {
        refresh_incumbent(state);
        state.success_count += 1;
        state.failure_count = 0;
    } else {
        state.failure_count += 1;
        state.success_count = 0;
    }

    if (state.success_count >= state.params.tau_succ) {
        state.tr_length = std::min(2.0 * state.tr_length, state.params.l_max);
        state.success_count = 0;
        state.failure_count = 0;
    } else if (state.failure_count >= state.params.tau_fail) {
        state.tr_length = std::max(state.tr_length / 2.0, state.params.l_min);
        state.success_count = 0;
        state.failure_count = 0;
    }
    state.l_trace.push_back(state.tr_length);
}

bool tr_sufficient(const BoState& state) { return state.tr_length > state.params.l_min; }

nlohmann::json state_to_json(const BoState& state) {
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : state.observations) obs.push_back({{"point", o.point}, {"value", o.value}});
    return {{"observations", std::move(obs)},
            {"tr_length", state.tr_length},
            {"success_count", state.success_count},
            {"failure_count", state.failure_count},
            {"best_value", state.best_value},
            {"best_point", state.best_point},
            {"l_trace", state.l_trace}};
}

}  // namespace satbo::bo
