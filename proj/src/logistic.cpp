#include "edpredict/logistic.hpp"

#include "edpredict/error.hpp"
#include "edpredict/model_card.hpp"

#include <cmath>

namespace edpredict {

namespace {

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd &design,
                                 const Eigen::VectorXd &coefficients) {
    return (design * coefficients.tail(design.cols())).array() + coefficients(0);
}

// log(1 + exp(eta)) without overflow
double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

double log_likelihood_at(const Eigen::VectorXd &eta, const Eigen::VectorXd &labels) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        ll += labels(i) * eta(i) - softplus(eta(i));
    }
    return ll;
}

} // namespace

double log_likelihood(const Eigen::MatrixXd &design, const Eigen::VectorXd &labels,
                      const Eigen::VectorXd &coefficients) {
    return log_likelihood_at(linear_predictor(design, coefficients), labels);
}

Eigen::VectorXd log_likelihood_gradient(const Eigen::MatrixXd &design,
                                        const Eigen::VectorXd &labels,
                                        const Eigen::VectorXd &coefficients) {
    const Eigen::VectorXd eta = linear_predictor(design, coefficients);
    Eigen::VectorXd residual(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        residual(i) = labels(i) - sigmoid(eta(i));
    }
    Eigen::VectorXd gradient(design.cols() + 1);
    gradient(0) = residual.sum();
    gradient.tail(design.cols()) = design.transpose() * residual;
    return gradient;
}

Eigen::VectorXd predict_probability(const Eigen::MatrixXd &design,
                                    const Eigen::VectorXd &coefficients) {
    Eigen::VectorXd eta = linear_predictor(design, coefficients);
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        eta(i) = sigmoid(eta(i));
    }
    return eta;
}

FitResult fit_logistic(const Eigen::MatrixXd &design, const Eigen::VectorXd &labels,
                       const FitConfig &config) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (labels.size() != n || n == 0) {
        throw Error(ErrorCode::InvalidArgument, "design rows and label count differ");
    }
    const double positives = labels.sum();
    if (positives <= 0.0 || positives >= static_cast<double>(n)) {
        throw Error(ErrorCode::SingleClass, "logistic fit needs both outcome classes");
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        if (design.col(j).maxCoeff() == design.col(j).minCoeff()) {
            throw Error(ErrorCode::InvalidArgument,
                        "design column " + std::to_string(j) + " is constant");
        }
    }

    // Augmented design with a leading intercept column.
    Eigen::MatrixXd x(n, p + 1);
    x.col(0).setOnes();
    x.rightCols(p) = design;

    {
        // rank of the column-scaled design; the ridge below would otherwise
        // hide exact collinearity
        Eigen::MatrixXd scaled = x;
        for (Eigen::Index j = 1; j <= p; ++j) {
            scaled.col(j) /= scaled.col(j).norm();
        }
        scaled.col(0) /= std::sqrt(static_cast<double>(n));
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
        qr.setThreshold(1e-10);
        if (qr.rank() < p + 1) {
            throw Error(ErrorCode::RankDeficientDesign,
                        "design has rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(p + 1) + " (collinear columns)");
        }
    }

    FitResult fit;
    fit.coefficients = Eigen::VectorXd::Zero(p + 1);
    const double rate = positives / static_cast<double>(n);
    fit.coefficients(0) = std::log(rate / (1.0 - rate));
    Eigen::VectorXd eta = x * fit.coefficients;
    fit.log_likelihood = log_likelihood_at(eta, labels);

    Eigen::VectorXd prob(n);
    Eigen::VectorXd weight(n);
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = sigmoid(eta(i));
            weight(i) = prob(i) * (1.0 - prob(i));
        }
        const Eigen::VectorXd gradient = x.transpose() * (labels - prob);
        Eigen::MatrixXd information = x.transpose() * weight.asDiagonal() * x;
        information.diagonal().array() += config.ridge_epsilon;
        const Eigen::LDLT<Eigen::MatrixXd> solver(information);
        Eigen::VectorXd step = solver.solve(gradient);
        if (solver.info() != Eigen::Success || !step.allFinite()) {
            throw Error(ErrorCode::RankDeficientDesign,
                        "information matrix is not solvable after ridge");
        }

        // Halve the Newton step until the likelihood does not decrease.
        Eigen::VectorXd candidate = fit.coefficients + step;
        Eigen::VectorXd candidate_eta = x * candidate;
        double candidate_ll = log_likelihood_at(candidate_eta, labels);
        for (int halving = 0; halving < 30 && !(candidate_ll >= fit.log_likelihood); ++halving) {
            step *= 0.5;
            candidate = fit.coefficients + step;
            candidate_eta = x * candidate;
            candidate_ll = log_likelihood_at(candidate_eta, labels);
        }
        fit.iterations = iter;
        if (!(candidate_ll >= fit.log_likelihood)) {
            // no ascent possible from here; current point is the optimum we can reach
            fit.converged = true;
            break;
        }
        const double change = candidate_ll - fit.log_likelihood;
        fit.coefficients = std::move(candidate);
        eta = std::move(candidate_eta);
        fit.log_likelihood = candidate_ll;
        if (change < config.convergence_tol) {
            fit.converged = true;
            break;
        }
    }
    fit.separation_flag = fit.coefficients.cwiseAbs().maxCoeff() > kSeparationThreshold;
    return fit;
}

} // namespace edpredict
