#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "imputelab/logit.hpp"

using namespace imputelab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
struct Data {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

Data simulate(std::mt19937_64& g, std::size_t n, const Eigen::VectorXd& beta) {
    std::uniform_int_distribution<int> mm(0, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Data d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), beta.size()), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        d.x(r, 0) = 1.0;
        for (Eigen::Index j = 1; j < beta.size(); ++j) d.x(r, j) = mm(g);
        const double eta = d.x.row(r).dot(beta);
        d.y[i] = u(g) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
    }
    return d;
}

Eigen::VectorXd central_difference(const Data& d, const Eigen::VectorXd& b, double h) {
    Eigen::VectorXd grad(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        Eigen::VectorXd up = b, dn = b;
        up[j] += h;
        dn[j] -= h;
        grad[j] = (logit_loglik(d.x, d.y, up) - logit_loglik(d.x, d.y, dn)) / (2 * h);
    }
    return grad;
}
}  // namespace

TEST_CASE("log-likelihood by hand") {
    Eigen::MatrixXd x(2, 1);
    x << 1.0, 1.0;
    const std::vector<int> y{1, 0};
    Eigen::VectorXd b(1);
    b << 0.3;
    const double p = 1.0 / (1.0 + std::exp(-0.3));
    CHECK_THAT(logit_loglik(x, y, b), WithinAbs(std::log(p) + std::log(1 - p), 1e-14));
    // no overflow far in the tails
    b << 800.0;
    CHECK(std::isfinite(logit_loglik(x, y, b)));
    CHECK_THAT(logit_loglik(x, y, b), WithinAbs(-800.0, 1e-9));
}

TEST_CASE("score matches finite differences of the log-likelihood") {
    std::mt19937_64 g(3);
    Eigen::VectorXd truth(4);
    truth << 0.974, 0.036, -0.118, -0.163;
    const Data d = simulate(g, 400, truth);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd b(4);
        for (Eigen::Index j = 0; j < 4; ++j) b[j] = nd(g);
        const Eigen::VectorXd s = logit_score(d.x, d.y, b);
        const Eigen::VectorXd fd = central_difference(d, b, 1e-5);
        for (Eigen::Index j = 0; j < 4; ++j) {
            CHECK(std::abs(s[j] - fd[j]) <= 1e-6 * std::max(1.0, std::abs(s[j])));
        }
    }
}

TEST_CASE("information matches finite differences of the score") {
    std::mt19937_64 g(4);
    Eigen::VectorXd truth(3);
    truth << 0.5, -0.2, 0.1;
    const Data d = simulate(g, 300, truth);
    Eigen::VectorXd b(3);
    b << 0.2, 0.1, -0.3;
    const Eigen::MatrixXd info = logit_information(d.x, b);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < 3; ++j) {
        Eigen::VectorXd up = b, dn = b;
        up[j] += h;
        dn[j] -= h;
        const Eigen::VectorXd col = -(logit_score(d.x, d.y, up) - logit_score(d.x, d.y, dn)) / (2 * h);
        for (Eigen::Index i = 0; i < 3; ++i) CHECK_THAT(col[i], WithinRel(info(i, j), 1e-6));
    }
}

TEST_CASE("fit converges with a monotone log-likelihood trace and zero score") {
    std::mt19937_64 g(5);
    Eigen::VectorXd truth(4);
    truth << 0.974, 0.036, -0.118, -0.163;
    const Data d = simulate(g, 5000, truth);
    const auto fit = fit_logit(d.x, d.y);
    REQUIRE(fit.converged);
    CHECK_FALSE(fit.separated);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) CHECK(fit.loglik_trace[i] > fit.loglik_trace[i - 1]);
    const Eigen::VectorXd s = logit_score(d.x, d.y, fit.coefficients);
    CHECK(s.cwiseAbs().maxCoeff() < 1e-4);
    // the optimum beats nearby points
    for (Eigen::Index j = 0; j < 4; ++j) {
        Eigen::VectorXd b = fit.coefficients;
        b[j] += 1e-3;
        CHECK(logit_loglik(d.x, d.y, b) < fit.loglik);
    }
    CHECK(fit.n == 5000);
}

TEST_CASE("intercept-only fit equals the logit of the sample mean") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 1);
    const std::vector<int> y{1, 1, 1, 0, 1, 0, 1, 1, 0, 1};
    const auto fit = fit_logit(x, y);
    REQUIRE(fit.converged);
    CHECK_THAT(fit.coefficients[0], WithinAbs(std::log(7.0 / 3.0), 1e-9));
    // model SE = 1 / sqrt(n p (1-p)); HC0 equals it for the intercept-only model
    const double se = 1.0 / std::sqrt(10 * 0.7 * 0.3);
    CHECK_THAT(fit.model_se[0], WithinAbs(se, 1e-9));
    CHECK_THAT(fit.robust_se[0], WithinAbs(se, 1e-9));
}

TEST_CASE("robust and model standard errors agree under a correct model") {
    std::mt19937_64 g(6);
    Eigen::VectorXd truth(3);
    truth << 0.3, 0.4, -0.5;
    const Data d = simulate(g, 20000, truth);
    const auto fit = fit_logit(d.x, d.y);
    REQUIRE(fit.converged);
    for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK_THAT(fit.robust_se[j], WithinRel(fit.model_se[j], 0.1));
        CHECK(std::abs(fit.coefficients[j] - truth[j]) < 5 * fit.robust_se[j]);
    }
}

TEST_CASE("perfect separation is flagged and not reported as converged") {
    Eigen::MatrixXd x(6, 2);
    x << 1, 0, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1;
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    const auto fit = fit_logit(x, y);
    CHECK_FALSE(fit.converged);
    CHECK(fit.separated);
}

TEST_CASE("rank deficiency and bad input raise") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 2, 1, 2, 1, 2, 1, 2;
    const std::vector<int> y{0, 1, 0, 1};
    CHECK_THROWS_AS(fit_logit(x, y), RankDeficient);
    Eigen::MatrixXd ok(3, 1);
    ok << 1, 1, 1;
    CHECK_THROWS_AS(fit_logit(ok, std::vector<int>{0, 2, 1}), DomainError);
    CHECK_THROWS_AS(fit_logit(ok, std::vector<int>{0, 1}), DomainError);
}

TEST_CASE("iteration cap leaves the fit unconverged") {
    std::mt19937_64 g(7);
    Eigen::VectorXd truth(2);
    truth << 1.0, -1.0;
    const Data d = simulate(g, 500, truth);
    LogitOptions opt;
    opt.max_iter = 1;
    const auto fit = fit_logit(d.x, d.y, opt);
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 1);
}
