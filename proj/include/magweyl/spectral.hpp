#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "magweyl/quantize.hpp"

namespace magweyl {

class NonHermitian : public std::runtime_error {
public:
    NonHermitian(const std::string& what, double asymmetry) : std::runtime_error(what), asymmetry(asymmetry) {}
    double asymmetry;  // relative Frobenius defect
};

struct SpectrumOptions {
    double hermitian_tol = 1e-10;
    bool eigenvectors = false;       // also fills localization
    bool keep_eigenvectors = false;  // store them in the result (N^n x N^n)
    double interior_fraction = 0.8;  // localization box |x_a| <= fraction L / 2
};

struct SpectrumResult {
    PhaseSpaceGrid grid;
    Eigen::VectorXd eigenvalues;     // ascending
    std::vector<double> localization;  // per eigenvalue, empty unless requested
    Eigen::MatrixXcd eigenvectors;   // empty unless kept
    double hermitian_defect = 0.0;
};

// Dense Hermitian eigensolve; throws NonHermitian when the relative defect
// exceeds hermitian_tol.
SpectrumResult spectrum(const MagneticOperator& M, const SpectrumOptions& opt = {});

// Fraction of the discrete mass of v inside |x_a| <= fraction L / 2.
double localization_score(const Eigen::Ref<const Eigen::VectorXcd>& v, const PhaseSpaceGrid& grid,
                          double fraction = 0.8);

// {(2k + 1) b : 0 <= k <= k_max}; b > 0.
std::vector<double> landau_reference(double b, int k_max);

struct Cluster {
    double mean = 0.0;
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
};

// Maximal runs of the sorted values with consecutive gaps <= gap; runs with
// fewer than min_size members are dropped.
std::vector<Cluster> clusters(const std::vector<double>& sorted, double gap, std::size_t min_size = 1);

// Clusters of the localized eigenvalues (score >= min_score). Edge states
// on the seam fill the gaps between levels, bulk states do not.
std::vector<Cluster> localized_clusters(const SpectrumResult& s, double gap, double min_score = 0.9,
                                        std::size_t min_size = 2);

// ---------------------------------------------------------------------------
// essential spectrum

struct Interval {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    std::vector<std::string> orbits;  // provenance
};

// Union of the intervals; pieces closer than tol are joined.
std::vector<Interval> merge_intervals(std::vector<Interval> pieces, double tol);

struct OrbitSpectrum {
    std::string orbit;
    Symbol f_Q;
    MagneticField B_Q;
    bool constant_coefficients = false;  // f_Q independent of x and B_Q = 0
    SpectrumResult lattice;              // eigenvalues of Op^{A_Q}(f_Q) on the grid
    std::optional<Interval> range;       // closure of f_Q(xi) over continuous xi, constant case only
    double merge_tol = 0.0;
    std::vector<Interval> intervals;     // this orbit's contribution
};

struct EssentialSpectrumResult {
    std::vector<OrbitSpectrum> orbits;
    std::vector<Interval> intervals;  // disjoint, ascending
    double merge_tol = 0.0;           // largest per-orbit tolerance used

    double lower_edge() const;
    bool contains(double lambda, double tol) const;
};

struct EssentialOptions {
    std::optional<double> merge_tol;  // default 2 dxi max |grad_xi f_Q| per orbit
    int range_refine = 4;             // sampling density of the range search, per lattice step
    int threads = 0;
};

// Union over the quasi-orbits of the spectra of the asymptotic operators.
// Throws MissingLimitRule for an orbit without a rule.
EssentialSpectrumResult essential_spectrum(const Symbol& f, const CoefficientAlgebra& algebra, const MagneticField& B,
                                           const PhaseSpaceGrid& grid, const EssentialOptions& opt = {});

// inf and sup of Re f(0, xi) over continuous xi in the lattice box, the inf
// refined by Brent steps; sup is +inf for m > 0.
Interval range_closure(const Symbol& f, const PhaseSpaceGrid& grid, int refine = 4);

struct BulkEigen {
    double value = 0.0;
    double localization = 0.0;
};

struct BulkReport {
    SpectrumResult bulk;
    EssentialSpectrumResult essential;
    double tolerance = 0.0;
    std::vector<BulkEigen> candidates;           // below lower_edge - tolerance
    std::vector<BulkEigen> delocalized_outside;  // score < 0.9 and outside the essential union
    bool candidates_localized = true;
    bool passed() const { return candidates_localized && delocalized_outside.empty(); }
};

struct BulkOptions {
    EssentialOptions essential{};
    double tolerance = 0.02;
    double min_localization = 0.9;
};

// Full-operator spectrum (transversal gauge of B) against the essential
// spectrum: eigenvalues below it must be interior-localized, delocalized
// ones must lie in it.
BulkReport compare_bulk_vs_essential(const Symbol& f, const CoefficientAlgebra& algebra, const MagneticField& B,
                                     const PhaseSpaceGrid& grid, const BulkOptions& opt = {});

}  // namespace magweyl
