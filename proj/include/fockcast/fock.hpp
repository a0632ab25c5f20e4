#pragma once

#include "fockcast/generator.hpp"
#include "fockcast/semigroup.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace fockcast {

/// Subexponential weights w(n) = exp(sigma_w n^p).
struct WeightFamily {
    double sigma_w = 1.0;
    double p = 0.5;

    double log_weight(int n) const;
    double operator()(int n) const;
    /// w(n)^-2.
    double inv_sq(int n) const;
};

/// max_{n <= n_max} (w^-2 * w^-2)(n) / w^-2(n) for a weight given by its logarithm.
double check_subconvolutive(const std::function<double(int)>& log_weight, int n_max);
double check_subconvolutive(const WeightFamily& weights, int n_max);

/// Weighted symmetric inner product <f_1 v ... v f_n, g_1 v ... v g_n> by
/// enumerating both permutation groups. Oracle only: n <= 4.
std::complex<double> fock_inner_product_small(const std::vector<Eigen::VectorXcd>& f,
                                              const std::vector<Eigen::VectorXcd>& g, const WeightFamily& weights);
/// Vacuum component: w(0)^2 conj(a) b.
std::complex<double> fock_inner_product_small(std::complex<double> a, std::complex<double> b,
                                              const WeightFamily& weights);

/// Permanent by Ryser's formula.
std::complex<double> permanent(const Eigen::MatrixXcd& a);

/// Same inner product through the Gram-matrix permanent, (w(n)^2 / n!) perm(G).
std::complex<double> fock_inner_product(const std::vector<Eigen::VectorXcd>& f, const std::vector<Eigen::VectorXcd>& g,
                                        const WeightFamily& weights);

/// binom(m + 2d, 2d). Throws ValidationError if the count exceeds 2^63.
std::uint64_t multi_index_count(int d, int m);

/// All weak compositions j of m into 2d + 1 parts, in descending
/// lexicographic order of j.
///
/// Entry k is stored as its m slot positions in nondecreasing order; slot s
/// stands for mode i = s - d. Consecutive entries share prefixes, which lets
/// products over the table be formed incrementally.
class MultiIndexTable {
public:
    MultiIndexTable() = default;
    MultiIndexTable(int d, int m);

    int d() const { return d_; }
    int m() const { return m_; }
    int slots() const { return 2 * d_ + 1; }
    std::size_t size() const { return multinomials_.size(); }

    const std::uint16_t* positions(std::size_t k) const { return positions_.data() + k * static_cast<std::size_t>(m_); }
    /// Length of the prefix entry k shares with entry k - 1 (0 for k = 0).
    int shared_prefix(std::size_t k) const { return prefix_[k]; }
    std::uint64_t multinomial(std::size_t k) const { return multinomials_[k]; }
    /// The (2d + 1)-tuple j of entry k.
    std::vector<int> exponents(std::size_t k) const;
    /// Position of the tuple j in the table.
    std::size_t index_of(const std::vector<int>& exponents) const;
    /// Position of the mirror tuple (j_i and j_-i swapped) of entry k.
    std::size_t mirror(std::size_t k) const;

private:
    int d_ = 0;
    int m_ = 0;
    std::vector<std::uint16_t> positions_;
    std::vector<std::uint8_t> prefix_;
    std::vector<std::uint64_t> multinomials_;
};

/// Mode list {0, p_1, ..., p_d}: the constant followed by the d pairs whose
/// eigenfunctions have the largest |<xi_j, f>|. Ties within 1e-12 |f| of
/// zero fall back to lower energy, then lower index.
std::vector<Eigen::Index> select_modes(const KoopmanEigensystem& eigensystem, const Eigen::VectorXd& f, int d);

/// Eigensystem columns for slots -d..d of a mode list.
std::vector<Eigen::Index> slot_columns(const KoopmanEigensystem& eigensystem, const std::vector<Eigen::Index>& modes);

/// rho_i(x_n) = (1/N) sum_m kappa(x_n, x_m) xi_i(x_m) for slots i = -d..d with
/// the plain Gaussian kappa of bandwidth eps. Rows of `data` are samples.
Eigen::MatrixXcd smoothed_eigenfunction_products(const KoopmanEigensystem& eigensystem, const Eigen::MatrixXd& data,
                                                 double eps, const std::vector<Eigen::Index>& modes);

/// (P_m f)(x_n) = sum_k kappa(x_n, x_k)^m f_k / sum_k kappa(x_n, x_k)^m with the
/// plain Gaussian kappa of bandwidth eps. Rows of `data` are samples.
Eigen::VectorXd kernel_power_average(const Eigen::MatrixXd& data, const Eigen::VectorXd& f, double eps, int power);

/// Moment arrays over a multi-index table.
struct Moments {
    Eigen::VectorXcd g;
    Eigen::VectorXcd h;
};

/// C_j = (1/N) sum_n f(x_n) prod_i rho_i(x_n)^{j_i}, and the same with f = 1.
Moments compute_moments(const Eigen::VectorXd& f, const Eigen::MatrixXcd& rho, const MultiIndexTable& table);

/// Maps basis values phi(x) to the pairings gamma_i(x), i = -d..d.
///
/// gamma_i(x) = conj((K_{sigma + tau/2} xi_i)(x)), so that
/// sum_i gamma_i(x) rho_i(y) is a real kernel peaked at y = x.
class GammaEvaluator {
public:
    GammaEvaluator() = default;
    GammaEvaluator(const KoopmanEigensystem& eigensystem, const SemigroupBasis& basis, double sigma, double tau,
                   const std::vector<Eigen::Index>& modes);

    int d() const { return static_cast<int>(coeffs_.cols()) - 1; }
    /// gamma at a point given all basis values phi_k(x).
    Eigen::VectorXcd operator()(const Eigen::VectorXd& phi) const;
    /// N x (2d + 1) gammas from an N x l matrix of basis values.
    Eigen::MatrixXcd at(const Eigen::MatrixXd& phi) const;

private:
    Eigen::MatrixXcd coeffs_;  // l x (d + 1)
};

/// gamma values for slots -d..d at each sample, computed through the stored basis.
Eigen::MatrixXcd gamma_values(const KoopmanEigensystem& eigensystem, const SemigroupBasis& basis, double sigma,
                              double tau, const std::vector<Eigen::Index>& modes);

enum class PredictorPath { moments, collapsed };

/// Degree-m polynomial predictor on the selected spectral torus.
class FockPredictor {
public:
    struct Value {
        /// Unweighted numerator and denominator polynomials.
        std::complex<double> num;
        std::complex<double> den;
        /// w(m)^-2 num and w(m)^-2 den.
        std::complex<double> g;
        std::complex<double> h;
        /// Re(num / den).
        double value = 0.0;
    };

    FockPredictor() = default;
    FockPredictor(MultiIndexTable table, std::vector<Eigen::Index> modes, Eigen::VectorXd omegas, Moments moments,
                  Eigen::MatrixXcd rho, Eigen::VectorXd f, GammaEvaluator gamma, WeightFamily weights);

    const MultiIndexTable& table() const { return table_; }
    const std::vector<Eigen::Index>& modes() const { return modes_; }
    /// Frequencies of slots -d..d.
    const Eigen::VectorXd& omegas() const { return omegas_; }
    const Moments& moments() const { return moments_; }
    const Eigen::MatrixXcd& rho() const { return rho_; }
    const GammaEvaluator& gamma() const { return gamma_; }
    const WeightFamily& weights() const { return weights_; }
    double denominator_floor() const { return floor_; }

    /// Sets the floor to 1e-12 max |den| over the given gamma rows at t = 0.
    void calibrate_floor(const Eigen::MatrixXcd& gammas);

    /// w_i(t) = gamma_i e^{-i omega_i t}.
    Eigen::VectorXcd lifted_weights(const Eigen::VectorXcd& gamma, double t) const;

    /// Evaluates the moment expansion. Throws NumericalError "denominator-underflow".
    Value evaluate_moments(const Eigen::VectorXcd& gamma, double t) const;
    /// Evaluates (1/N) sum_n f_n S_n^m / (1/N) sum_n S_n^m with S_n = sum_i w_i rho_i(x_n).
    Value evaluate_collapsed(const Eigen::VectorXcd& gamma, double t) const;
    Value evaluate(const Eigen::VectorXcd& gamma, double t, PredictorPath path) const;

private:
    Value finish(std::complex<double> num, std::complex<double> den) const;

    MultiIndexTable table_;
    std::vector<Eigen::Index> modes_;
    Eigen::VectorXd omegas_;
    Moments moments_;
    Eigen::MatrixXcd rho_;
    Eigen::VectorXd f_;
    GammaEvaluator gamma_;
    WeightFamily weights_;
    double floor_ = 0.0;
};

/// Prediction at an off-sample state x through the Nystrom extension.
double predict_fock(const FockPredictor& predictor, const NystromExtension& nystrom, const Eigen::VectorXd& x,
                    double t);
double predict_fock_collapsed(const FockPredictor& predictor, const NystromExtension& nystrom,
                              const Eigen::VectorXd& x, double t);

}  // namespace fockcast
