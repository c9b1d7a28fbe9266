#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "magweyl/inversion.hpp"
#include "magweyl/magnetics.hpp"
#include "magweyl/quantize.hpp"
#include "magweyl/spectral.hpp"
#include "magweyl/symbols.hpp"
#include "magweyl/validation.hpp"

namespace py = pybind11;
using namespace magweyl;

namespace {

std::span<const double> as_span(const std::vector<double>& v) { return {v.data(), v.size()}; }

}  // namespace

PYBIND11_MODULE(magweyl, m) {
    m.doc() = "Magnetic Weyl quantization on finite phase-space grids";

    py::register_exception<NeumannDivergence>(m, "NeumannDivergence", PyExc_RuntimeError);
    py::register_exception<NonHermitian>(m, "NonHermitian", PyExc_ValueError);
    py::register_exception<MissingLimitRule>(m, "MissingLimitRule", PyExc_ValueError);

    py::class_<PhaseSpaceGrid>(m, "Grid")
        .def(py::init(&make_grid), py::arg("n"), py::arg("L"), py::arg("N"))
        .def_readonly("n", &PhaseSpaceGrid::n)
        .def_readonly("L", &PhaseSpaceGrid::L)
        .def_readonly("N", &PhaseSpaceGrid::N)
        .def_property_readonly("dx", &PhaseSpaceGrid::dx)
        .def_property_readonly("dxi", &PhaseSpaceGrid::dxi)
        .def_property_readonly("size", &PhaseSpaceGrid::size)
        .def("positions", [](const PhaseSpaceGrid& g) {
            std::vector<double> x(g.N);
            for (int k = 0; k < g.N; ++k) x[k] = g.position(k);
            return x;
        })
        .def("momenta", [](const PhaseSpaceGrid& g) {
            std::vector<double> xi(g.N);
            for (int j = 0; j < g.N; ++j) xi[j] = g.momentum(j);
            return xi;
        })
        .def("__repr__", [](const PhaseSpaceGrid& g) {
            return "Grid(n=" + std::to_string(g.n) + ", L=" + std::to_string(g.L) + ", N=" + std::to_string(g.N) + ")";
        });

    py::class_<ScalarField>(m, "ScalarField")
        .def_static("parse", &ScalarField::parse)
        .def_static("constant", &ScalarField::constant)
        .def("__call__", [](const ScalarField& s, const std::vector<double>& x) { return s(as_span(x)); });

    py::class_<MagneticField>(m, "MagneticField")
        .def_static("parse", &MagneticField::parse, py::arg("b12"))
        .def_static("constant", &MagneticField::constant, py::arg("b"))
        .def_static("zero", &MagneticField::zero, py::arg("n"));

    py::class_<VectorPotential>(m, "VectorPotential")
        .def_static("zero", &VectorPotential::zero, py::arg("n"))
        .def_static("explicit", [](const std::vector<std::string>& comps) {
            std::vector<ScalarField> f;
            for (const auto& c : comps) f.push_back(ScalarField::parse(c));
            return VectorPotential::explicit_components(std::move(f));
        });

    m.def("transversal_gauge", [](const MagneticField& B) { return transversal_gauge(B); }, py::arg("B"));
    m.def("gauge_shift", &gauge_shift, py::arg("A"), py::arg("psi"));

    m.def(
        "gamma_B",
        [](const MagneticField& B, const std::vector<double>& x, const std::vector<double>& y,
           const std::vector<double>& z) { return gamma_B(B, as_span(x), as_span(y), as_span(z)); },
        py::arg("B"), py::arg("x"), py::arg("y"), py::arg("z"));
    m.def(
        "omega_cocycle",
        [](const MagneticField& B, const std::vector<double>& q, const std::vector<double>& x,
           const std::vector<double>& y) { return omega_cocycle(B, as_span(q), as_span(x), as_span(y)); },
        py::arg("B"), py::arg("q"), py::arg("x"), py::arg("y"));

    py::class_<Symbol>(m, "Symbol")
        .def_static("parse", &Symbol::parse, py::arg("expr"), py::arg("n"), py::arg("m"), py::arg("rho") = 1.0,
                    py::arg("delta") = 0.0)
        .def_readonly("n", &Symbol::n)
        .def("__call__", [](const Symbol& f, const std::vector<double>& x, const std::vector<double>& xi) {
            return f(as_span(x), as_span(xi));
        });
    m.def("seam_blend", &seam_blend, py::arg("f"), py::arg("grid"), py::arg("inner") = 0.35);

    m.def(
        "quantize",
        [](const Symbol& f, const VectorPotential& A, const PhaseSpaceGrid& g, int threads) {
            py::gil_scoped_release nogil;
            return quantize(f, A, g, threads).matrix;
        },
        py::arg("f"), py::arg("A"), py::arg("grid"), py::arg("threads") = 0,
        "Dense matrix of the magnetic Weyl quantization on the position grid.");
    m.def("operator_norm", &operator_norm);

    m.def(
        "gauge_covariance_residual",
        [](const Symbol& f, const VectorPotential& A, const ScalarField& psi, const PhaseSpaceGrid& g, bool wrong) {
            py::gil_scoped_release nogil;
            return gauge_covariance_residual(f, A, psi, g, wrong);
        },
        py::arg("f"), py::arg("A"), py::arg("psi"), py::arg("grid"), py::arg("wrong") = false);

    m.def(
        "neumann_invert",
        [](const Symbol& f, cplx z, const VectorPotential& A, const PhaseSpaceGrid& g, double tol, int k_max) {
            InversionOptions opt;
            opt.tol = tol;
            opt.k_max = k_max;
            InverseResult r = [&] {
                py::gil_scoped_release nogil;
                return neumann_invert(f, z, A, g, opt);
            }();
            py::dict d;
            d["matrix"] = r.matrix;
            d["terms"] = r.terms;
            d["residual"] = r.residual;
            d["operator_residual"] = r.operator_residual;
            d["norm_Rz"] = r.norm_Rz;
            d["residual_history"] = r.residual_history;
            return d;
        },
        py::arg("f"), py::arg("z"), py::arg("A"), py::arg("grid"), py::arg("tol") = 1e-10, py::arg("k_max") = 200);

    m.def(
        "spectrum",
        [](const Eigen::MatrixXcd& M, const PhaseSpaceGrid& g, bool localization) -> py::tuple {
            SpectrumOptions opt;
            opt.eigenvectors = localization;
            SpectrumResult s = [&] {
                py::gil_scoped_release nogil;
                return spectrum(MagneticOperator{g, M, VectorPotential::zero(g.n), ""}, opt);
            }();
            if (!localization) return py::make_tuple(s.eigenvalues, py::none());
            return py::make_tuple(s.eigenvalues, s.localization);
        },
        py::arg("matrix"), py::arg("grid"), py::arg("localization") = false,
        "Eigenvalues (ascending) and optionally the interior localization score of each eigenvector.");
    m.def("landau_reference", &landau_reference, py::arg("b"), py::arg("k_max"));

    py::class_<CoefficientAlgebra>(m, "CoefficientAlgebra")
        .def_static("constant_coefficients", &CoefficientAlgebra::constant_coefficients)
        .def_static("vanishing_at_infinity", &CoefficientAlgebra::vanishing_at_infinity, py::arg("n"))
        .def_static("asymptotic_limits_1d", &CoefficientAlgebra::asymptotic_limits_1d)
        .def_static("asymptotic_directions", &CoefficientAlgebra::asymptotic_directions, py::arg("directions"))
        .def_static("periodic", &CoefficientAlgebra::periodic, py::arg("lattice"), py::arg("translates") = 3);

    m.def(
        "essential_spectrum",
        [](const Symbol& f, const CoefficientAlgebra& alg, const MagneticField& B, const PhaseSpaceGrid& g) {
            EssentialSpectrumResult e = [&] {
                py::gil_scoped_release nogil;
                return essential_spectrum(f, alg, B, g);
            }();
            std::vector<std::pair<double, double>> iv;
            for (const auto& i : e.intervals) iv.emplace_back(i.lo, i.hi);
            return iv;
        },
        py::arg("f"), py::arg("algebra"), py::arg("B"), py::arg("grid"),
        "Merged intervals (lo, hi) of the essential spectrum; hi may be inf.");
}
