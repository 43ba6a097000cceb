#pragma once

// Binary logit by damped Newton-Raphson, with HC0 sandwich standard errors.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "imputelab/error.hpp"

namespace imputelab {

struct LogitOptions {
    std::size_t max_iter = 100;
    double tol = 1e-8;  // on max |score component|
    std::size_t max_halvings = 40;
    double separation_eta = 15.0;  // |x'b| beyond this (p within 3e-7 of 0 or 1) flags separation
};

struct LogitFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd robust_se;  // HC0 sandwich
    Eigen::VectorXd model_se;   // inverse information
    std::size_t n = 0;
    bool converged = false;
    bool separated = false;
    std::size_t iterations = 0;
    double loglik = 0.0;
    double max_abs_score = 0.0;
    std::vector<double> loglik_trace;  // log-likelihood after each accepted step, starting at b = 0
};

namespace detail {
inline double softplus(double t) noexcept { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
inline double logistic(double t) noexcept {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}
inline void check_shapes(const Eigen::MatrixXd& x, std::span<const int> y) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw DomainError("logit: design rows != outcome count");
    for (int v : y) {
        if (v != 0 && v != 1) throw DomainError("logit: outcomes must be 0 or 1");
    }
}
}  // namespace detail

inline double logit_loglik(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        ll += static_cast<double>(y[static_cast<std::size_t>(i)]) * eta[i] - detail::softplus(eta[i]);
    }
    return ll;
}

inline Eigen::VectorXd logit_score(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        resid[i] = static_cast<double>(y[static_cast<std::size_t>(i)]) - detail::logistic(eta[i]);
    }
    return x.transpose() * resid;
}

// Observed (= expected) information X' diag(p(1-p)) X.
inline Eigen::MatrixXd logit_information(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = detail::logistic(eta[i]);
        w[i] = p * (1.0 - p);
    }
    return x.transpose() * w.asDiagonal() * x;
}

inline LogitFit fit_logit(const Eigen::MatrixXd& x, std::span<const int> y, const LogitOptions& opt = {}) {
    detail::check_shapes(x, y);
    const Eigen::Index k = x.cols();
    if (x.rows() < k) throw RankDeficient("logit: fewer observations than coefficients");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < k) {
        throw RankDeficient("logit: design matrix has rank " + std::to_string(qr.rank()) + " < " + std::to_string(k));
    }

    LogitFit fit;
    fit.n = y.size();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    double ll = logit_loglik(x, y, beta);
    fit.loglik_trace.push_back(ll);
    Eigen::VectorXd score = logit_score(x, y, beta);

    while (true) {
        fit.max_abs_score = score.cwiseAbs().maxCoeff();
        if (fit.max_abs_score < opt.tol) {
            fit.converged = true;
            break;
        }
        if (fit.iterations >= opt.max_iter) break;
        const Eigen::MatrixXd info = logit_information(x, beta);
        const Eigen::VectorXd step = info.ldlt().solve(score);
        if (!step.allFinite()) break;

        double scale = 1.0;
        bool accepted = false;
        for (std::size_t h = 0; h <= opt.max_halvings; ++h, scale *= 0.5) {
            const Eigen::VectorXd trial = beta + scale * step;
            const double ll_trial = logit_loglik(x, y, trial);
            if (ll_trial > ll) {
                beta = trial;
                ll = ll_trial;
                accepted = true;
                break;
            }
        }
        ++fit.iterations;
        if (!accepted) {
            // No representable increase left.  That is convergence only if the
            // predicted gain (half the Newton decrement) is itself at rounding
            // level for a log-likelihood of this size.
            const double gain = 0.5 * score.dot(step);
            const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ll));
            fit.converged = gain <= resolution;
            break;
        }
        fit.loglik_trace.push_back(ll);
        score = logit_score(x, y, beta);
    }

    fit.coefficients = beta;
    fit.loglik = ll;
    const Eigen::VectorXd eta = x * beta;
    fit.separated = eta.cwiseAbs().maxCoeff() > opt.separation_eta;
    if (fit.separated) fit.converged = false;

    const Eigen::MatrixXd bread = logit_information(x, beta).inverse();
    // Sum of outer products of per-observation scores x_i (y_i - p_i).
    Eigen::VectorXd r2(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double r = static_cast<double>(y[static_cast<std::size_t>(i)]) - detail::logistic(eta[i]);
        r2[i] = r * r;
    }
    const Eigen::MatrixXd meat = x.transpose() * r2.asDiagonal() * x;
    const Eigen::MatrixXd sandwich = bread * meat * bread;
    fit.robust_se = sandwich.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.model_se = bread.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

}  // namespace imputelab
