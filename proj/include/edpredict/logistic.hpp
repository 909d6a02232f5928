#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace edpredict {

struct FitConfig {
    int max_iterations = 50;
    double convergence_tol = 1e-8; // on the log-likelihood change
    double ridge_epsilon = 1e-6;   // added to the information-matrix diagonal
    std::uint64_t rng_seed = 42;
    int bootstrap_replicates = 200;
    int threads = 1;
};

/// Binomial logistic fit. `coefficients(0)` is the intercept, followed by
/// one coefficient per design column.
struct FitResult {
    Eigen::VectorXd coefficients;
    bool converged = false;
    int iterations = 0;
    double log_likelihood = 0.0;
    bool separation_flag = false; // some |beta| > 15 when the fit stopped
};

inline constexpr double kSeparationThreshold = 15.0;

/// Newton/IRLS on the binomial log-likelihood. `design` holds the predictor
/// columns only; an intercept is added. Throws SingleClass, InvalidArgument
/// (shape mismatch, constant predictor column) or RankDeficientDesign.
FitResult fit_logistic(const Eigen::MatrixXd &design, const Eigen::VectorXd &labels,
                       const FitConfig &config = {});

/// Log-likelihood and its gradient for intercept-first coefficients.
double log_likelihood(const Eigen::MatrixXd &design, const Eigen::VectorXd &labels,
                      const Eigen::VectorXd &coefficients);
Eigen::VectorXd log_likelihood_gradient(const Eigen::MatrixXd &design,
                                        const Eigen::VectorXd &labels,
                                        const Eigen::VectorXd &coefficients);

/// P(label = 1) for each row.
Eigen::VectorXd predict_probability(const Eigen::MatrixXd &design,
                                    const Eigen::VectorXd &coefficients);

} // namespace edpredict
