#pragma once

// Maximum-likelihood density-matrix reconstruction. The engine runs RrhoR
// fixed-point iterations until the characteristic slow-down sets in (about
// (t+1)^2/4 iterations), then switches to regularized gradient ascent over
// the square-root parametrization
//     rho(A) = (S + A)(S + A)^dag / Tr[...]      with S = sqrt(rho),
// where A maximizes a quadratic model of the log-likelihood subject to the
// trust region Tr(A A^dag) <= u. Iterations halt once the gap bound
// lambda_max(R) - N drops below the configured threshold.

#include "tomo/fock.hpp"
#include "tomo/povm.hpp"
#include "tomo/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tomo::mle {

using fock::Complex;
using fock::DensityMatrix;
using fock::Matrix;
using fock::RealVector;

namespace detail {

// Isometry between Hermitian d x d matrices and real vectors of length d^2:
// diagonal first, then sqrt(2)-scaled real/imaginary parts of the upper
// triangle, so that Tr(H K) is the Euclidean dot product of the images.
inline Eigen::VectorXd herm_to_x(const Matrix& h) {
    const int d = static_cast<int>(h.rows());
    Eigen::VectorXd x(d * d);
    for (int i = 0; i < d; ++i) x[i] = h(i, i).real();
    int idx = d;
    for (int n = 0; n < d; ++n) {
        for (int m = 0; m < n; ++m) {
            x[idx++] = std::numbers::sqrt2 * h(m, n).real();
            x[idx++] = std::numbers::sqrt2 * h(m, n).imag();
        }
    }
    return x;
}

inline Matrix x_to_herm(const Eigen::VectorXd& x, int d) {
    Matrix h(d, d);
    for (int i = 0; i < d; ++i) h(i, i) = x[i];
    int idx = d;
    for (int n = 0; n < d; ++n) {
        for (int m = 0; m < n; ++m) {
            const Complex v(x[idx] / std::numbers::sqrt2, x[idx + 1] / std::numbers::sqrt2);
            idx += 2;
            h(m, n) = v;
            h(n, m) = std::conj(v);
        }
    }
    return h;
}

inline double max_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

}  // namespace detail

// Measurement operators with multiplicities: f_i = 1 per raw sample, or the
// bin count for histogram data. Operators are stored in the real Hermitian
// parametrization so that all Tr(Pi_i rho) evaluate as one matrix-vector
// product per iteration.
struct LikelihoodModel {
    int dim = 0;
    Eigen::MatrixXd operators;        // one row per Pi_i
    Eigen::VectorXd multiplicities;   // f_i >= 1
    double total_counts = 0.0;        // N = sum f_i

    std::size_t size() const { return static_cast<std::size_t>(operators.rows()); }

    static LikelihoodModel from_operators(const std::vector<Matrix>& ops,
                                          const std::vector<double>& f) {
        if (ops.empty()) throw std::invalid_argument("LikelihoodModel: no operators");
        if (ops.size() != f.size())
            throw std::invalid_argument("LikelihoodModel: operators/multiplicities size mismatch");
        LikelihoodModel model;
        model.dim = static_cast<int>(ops.front().rows());
        model.operators.resize(ops.size(), model.dim * model.dim);
        model.multiplicities.resize(ops.size());
        for (std::size_t i = 0; i < ops.size(); ++i) {
            if (ops[i].rows() != model.dim || ops[i].cols() != model.dim)
                throw std::invalid_argument("LikelihoodModel: operator dimension mismatch");
            if (!fock::is_hermitian(ops[i], 1e-10))
                throw std::invalid_argument("LikelihoodModel: operators must be Hermitian");
            if (!(f[i] >= 1.0))
                throw std::invalid_argument("LikelihoodModel: multiplicities must be >= 1");
            model.operators.row(i) = detail::herm_to_x(ops[i]).transpose();
            model.multiplicities[i] = f[i];
        }
        model.total_counts = model.multiplicities.sum();
        return model;
    }

    // Raw (unbinned) data: one point operator per sample.
    static LikelihoodModel from_raw_data(const sampling::QuadratureDataset& dataset) {
        if (dataset.samples.empty()) throw std::invalid_argument("LikelihoodModel: empty dataset");
        const int d = dataset.truncation + 1;
        LikelihoodModel model;
        model.dim = d;
        model.operators.resize(dataset.samples.size(), d * d);
        model.multiplicities = Eigen::VectorXd::Ones(dataset.samples.size());
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            const auto& s = dataset.samples[i];
            model.operators.row(i) =
                detail::herm_to_x(povm::point_povm(s.x, s.theta, dataset.truncation, dataset.eta))
                    .transpose();
        }
        model.total_counts = static_cast<double>(dataset.samples.size());
        return model;
    }

    static LikelihoodModel from_bin_operators(const povm::BinOperatorSet& set) {
        std::vector<Matrix> ops;
        std::vector<double> f;
        for (const auto& phase : set.phases) {
            for (const auto& bin : phase.bins) {
                ops.push_back(*bin.op);
                f.push_back(static_cast<double>(bin.count));
            }
        }
        return from_operators(ops, f);
    }

    // Tr(Pi_i rho) for all i, floored away from zero.
    Eigen::VectorXd probabilities(const Matrix& rho, double floor = 1e-12) const {
        Eigen::VectorXd p = operators * detail::herm_to_x(rho);
        return p.cwiseMax(floor);
    }
};

struct MLEConfig {
    int rpr_iterations = -1;          // < 0: use ceil((t+1)^2 / 4)
    double stop_gap = 0.2;
    double trust_radius_init = 1e-4;  // u0, on Tr(A A^dag)
    double trust_grow = 2.0;
    double trust_shrink = 0.5;
    int max_iterations = 5000;
    double prob_floor = 1e-12;

    int resolved_rpr_iterations(int dim) const {
        if (rpr_iterations >= 0) return rpr_iterations;
        return static_cast<int>(std::ceil(double(dim) * double(dim) / 4.0));
    }
};

struct ReconstructionResult {
    DensityMatrix rho_hat;
    double final_log_likelihood = 0.0;
    int iterations_rpr = 0;
    int iterations_rga = 0;
    double final_gap_bound = 0.0;
    double wall_time_s = 0.0;
    bool converged = false;
};

struct StagnationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double log_likelihood(const LikelihoodModel& model, const Matrix& rho,
                             double prob_floor = 1e-12) {
    const Eigen::VectorXd p = model.probabilities(rho, prob_floor);
    return model.multiplicities.dot(p.array().log().matrix());
}

inline double log_likelihood(const LikelihoodModel& model, const DensityMatrix& rho,
                             double prob_floor = 1e-12) {
    return log_likelihood(model, rho.matrix(), prob_floor);
}

// R = sum_i f_i Pi_i / Tr(Pi_i rho); satisfies Tr(R rho) = N.
inline Matrix r_operator(const LikelihoodModel& model, const Matrix& rho,
                         double prob_floor = 1e-12) {
    const Eigen::VectorXd p = model.probabilities(rho, prob_floor);
    const Eigen::VectorXd w = model.multiplicities.cwiseQuotient(p);
    return detail::x_to_herm(model.operators.transpose() * w, model.dim);
}

inline Matrix r_operator(const LikelihoodModel& model, const DensityMatrix& rho,
                         double prob_floor = 1e-12) {
    return r_operator(model, rho.matrix(), prob_floor);
}

// Upper bound on L(rho_ML) - L(rho): lambda_max(R) - N.
inline double stopping_gap(const LikelihoodModel& model, const Matrix& rho,
                           double prob_floor = 1e-12) {
    return detail::max_eigenvalue(r_operator(model, rho, prob_floor)) - model.total_counts;
}

inline double stopping_gap(const LikelihoodModel& model, const DensityMatrix& rho,
                           double prob_floor = 1e-12) {
    return stopping_gap(model, rho.matrix(), prob_floor);
}

namespace detail {

inline Matrix hermitized(Matrix m) { return 0.5 * (m + m.adjoint().eval()); }

// rho -> R rho R / Tr(R rho R), with a damped fallback (rho mixed toward the
// update, epsilon halved) on the rare non-monotone step.
inline Matrix rpr_step_matrix(const LikelihoodModel& model, const Matrix& rho, const Matrix& r,
                              double current_ll, double prob_floor) {
    Matrix updated = r * rho * r;
    const double tr = updated.trace().real();
    if (!(tr > 0.0)) return rho;
    updated = hermitized(updated / tr);
    if (log_likelihood(model, updated, prob_floor) >= current_ll - 1e-9) return updated;
    for (double eps = 0.5; eps > 1e-12; eps *= 0.5) {
        const Matrix damped = (1.0 - eps) * rho + eps * updated;
        if (log_likelihood(model, damped, prob_floor) >= current_ll - 1e-9) return damped;
    }
    return rho;
}

struct RgaStepResult {
    Matrix rho;
    bool accepted = false;
    double new_u = 0.0;
    double candidate_ll = 0.0;
};

// One trust-region step. The quadratic model's gradient term is exact,
// delta L = Tr(R delta_rho); curvature along the step direction is the
// Gauss-Newton term sum_i f_i (Tr(Pi_i delta_rho)/p_i)^2.
inline RgaStepResult rga_step_matrix(const LikelihoodModel& model, const Matrix& rho,
                                     const Matrix& r, double current_ll, double u,
                                     double trust_grow, double trust_shrink, double prob_floor) {
    const int d = model.dim;
    const double n_total = model.total_counts;
    const Matrix s = fock::matrix_sqrt(rho);
    Matrix grad = (r - n_total * Matrix::Identity(d, d)) * s;
    const double gnorm = grad.norm();
    RgaStepResult out{rho, false, u * trust_shrink, current_ll};
    if (!(gnorm > 0.0)) return out;
    grad /= gnorm;

    // First-order change of the normalized parametrization along grad.
    Matrix delta = s * grad.adjoint() + grad * s;
    delta -= rho * delta.trace().real();
    delta = hermitized(std::move(delta));

    const double slope = (r * delta).trace().real();  // = 2 * gnorm
    const Eigen::VectorXd p = model.probabilities(rho, prob_floor);
    const Eigen::VectorXd dp = model.operators * herm_to_x(delta);
    const double curvature = model.multiplicities.dot(dp.cwiseQuotient(p).cwiseAbs2());

    double step = std::sqrt(u);
    if (curvature > 0.0) step = std::min(step, slope / curvature);
    if (!(step > 0.0)) return out;

    const Matrix b = s + step * grad;
    Matrix candidate = b * b.adjoint();
    candidate = hermitized(candidate / candidate.trace().real());
    const double candidate_ll = log_likelihood(model, candidate, prob_floor);
    if (candidate_ll < current_ll) return out;
    return {std::move(candidate), true, u * trust_grow, candidate_ll};
}

// Final cleanup: eigenvalue clip + renormalization so the result satisfies
// the DensityMatrix invariants exactly.
inline DensityMatrix project_to_density(const Matrix& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitized(rho));
    RealVector vals = es.eigenvalues().cwiseMax(0.0);
    const double tr = vals.sum();
    if (!(tr > 0.0)) throw std::runtime_error("project_to_density: zero trace");
    vals /= tr;
    return DensityMatrix(
        hermitized(es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint()));
}

}  // namespace detail

inline DensityMatrix rpr_step(const LikelihoodModel& model, const DensityMatrix& rho,
                              double prob_floor = 1e-12) {
    const Matrix r = r_operator(model, rho.matrix(), prob_floor);
    const double ll = log_likelihood(model, rho.matrix(), prob_floor);
    return detail::project_to_density(
        detail::rpr_step_matrix(model, rho.matrix(), r, ll, prob_floor));
}

struct RgaOutcome {
    DensityMatrix rho;
    bool accepted = false;
    double new_u = 0.0;
};

inline RgaOutcome rga_step(const LikelihoodModel& model, const DensityMatrix& rho, double u,
                           const MLEConfig& config = {}) {
    if (!(u > 0.0)) throw std::invalid_argument("rga_step: trust radius must be > 0");
    if (u < 1e-18) throw StagnationError("rga_step: trust radius underflow");
    const Matrix r = r_operator(model, rho.matrix(), config.prob_floor);
    const double ll = log_likelihood(model, rho.matrix(), config.prob_floor);
    auto step = detail::rga_step_matrix(model, rho.matrix(), r, ll, u, config.trust_grow,
                                        config.trust_shrink, config.prob_floor);
    return {step.accepted ? detail::project_to_density(step.rho) : rho, step.accepted, step.new_u};
}

// Full reconstruction from the maximally mixed state. RrhoR warm-up, then
// RGA until the gap bound meets stop_gap; if the trust radius underflows the
// engine re-enters RrhoR before resuming RGA.
inline ReconstructionResult reconstruct(const LikelihoodModel& model, const MLEConfig& config = {}) {
    if (!(config.stop_gap > 0.0)) throw std::invalid_argument("reconstruct: stop_gap must be > 0");
    if (config.max_iterations < 1)
        throw std::invalid_argument("reconstruct: max_iterations must be >= 1");
    if (!(config.trust_radius_init > 0.0) || !(config.trust_grow > 1.0) ||
        !(config.trust_shrink > 0.0) || !(config.trust_shrink < 1.0))
        throw std::invalid_argument("reconstruct: invalid trust-region parameters");
    const auto t_start = std::chrono::steady_clock::now();
    const int d = model.dim;
    const double n_total = model.total_counts;

    Matrix rho = Matrix::Identity(d, d) / double(d);
    Eigen::VectorXd p = model.probabilities(rho, config.prob_floor);
    double ll = model.multiplicities.dot(p.array().log().matrix());
    Matrix r = detail::x_to_herm(
        model.operators.transpose() * model.multiplicities.cwiseQuotient(p), d);
    double gap = detail::max_eigenvalue(r) - n_total;

    auto refresh = [&](const Matrix& next) {
        rho = next;
        p = model.probabilities(rho, config.prob_floor);
        ll = model.multiplicities.dot(p.array().log().matrix());
        r = detail::x_to_herm(model.operators.transpose() * model.multiplicities.cwiseQuotient(p),
                              d);
        gap = detail::max_eigenvalue(r) - n_total;
    };

    const int rpr_target = config.resolved_rpr_iterations(d);
    int iters_rpr = 0, iters_rga = 0;
    auto total_iters = [&] { return iters_rpr + iters_rga; };

    auto rpr_block = [&] {
        for (int k = 0; k < rpr_target && gap > config.stop_gap &&
                        total_iters() < config.max_iterations;
             ++k) {
            refresh(detail::rpr_step_matrix(model, rho, r, ll, config.prob_floor));
            ++iters_rpr;
        }
    };

    rpr_block();
    double u = config.trust_radius_init;
    while (gap > config.stop_gap && total_iters() < config.max_iterations) {
        const auto step = detail::rga_step_matrix(model, rho, r, ll, u, config.trust_grow,
                                                  config.trust_shrink, config.prob_floor);
        u = step.new_u;
        ++iters_rga;
        if (step.accepted) refresh(step.rho);
        if (u < 1e-18) {  // stagnation: fall back to RrhoR, then retry RGA
            rpr_block();
            u = config.trust_radius_init;
        }
    }

    const auto t_end = std::chrono::steady_clock::now();
    return {detail::project_to_density(rho),
            ll,
            iters_rpr,
            iters_rga,
            gap,
            std::chrono::duration<double>(t_end - t_start).count(),
            gap <= config.stop_gap};
}

// Density matrix export: a real block then an imaginary block, each
// (t+1) x (t+1), comma separated.
inline void write_density_matrix_csv(const DensityMatrix& rho, std::ostream& os) {
    char buf[32];
    const auto& m = rho.matrix();
    for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < rho.dim(); ++i) {
            for (int j = 0; j < rho.dim(); ++j) {
                const double v = pass == 0 ? m(i, j).real() : m(i, j).imag();
                std::snprintf(buf, sizeof buf, "%.17g", v);
                os << buf << (j + 1 < rho.dim() ? "," : "\n");
            }
        }
    }
}

inline void write_result_metadata(const ReconstructionResult& result, std::ostream& os) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "{\n  \"iterations_rpr\": %d,\n  \"iterations_rga\": %d,\n"
                  "  \"final_gap_bound\": %.17g,\n  \"final_log_likelihood\": %.17g,\n"
                  "  \"wall_time_s\": %.6g,\n  \"converged\": %s\n}\n",
                  result.iterations_rpr, result.iterations_rga, result.final_gap_bound,
                  result.final_log_likelihood, result.wall_time_s,
                  result.converged ? "true" : "false");
    os << buf;
}

}  // namespace tomo::mle
