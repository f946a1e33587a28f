#include "krondpp/dpp_model.hpp"
#include "krondpp/io.hpp"
#include "krondpp/kron_linalg.hpp"
#include "krondpp/learning.hpp"
#include "krondpp/partitioning.hpp"
#include "krondpp/rng.hpp"
#include "krondpp/sampling.hpp"
#include "krondpp/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;

using namespace krondpp;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Determinantal point processes with Kronecker-product kernels";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);

  py::class_<SpdMatrix>(m, "SpdMatrix")
      .def_static("checked", &SpdMatrix::checked, py::arg("m"), py::arg("floor") = 0.0)
      .def_static("trusted", &SpdMatrix::trusted, py::arg("m"))
      .def_property_readonly("mat", &SpdMatrix::mat)
      .def_property_readonly("rows", &SpdMatrix::rows);

  py::class_<KronKernel>(m, "KronKernel")
      .def(py::init([](const std::vector<Matrix>& factors) {
             std::vector<SpdMatrix> checked;
             checked.reserve(factors.size());
             for (const Matrix& f : factors) checked.push_back(SpdMatrix::checked(f));
             return KronKernel(std::move(checked));
           }),
           py::arg("factors"))
      .def_property_readonly("dim", &KronKernel::dim)
      .def_property_readonly("num_factors", &KronKernel::num_factors)
      .def_property_readonly("dims", &KronKernel::dims)
      .def("factor", [](const KronKernel& k, Index i) { return k.factor(i).mat(); }, py::arg("i"))
      .def("entry", &KronKernel::entry, py::arg("i"), py::arg("j"))
      .def("materialize", &KronKernel::materialize);

  py::class_<TrainingSet>(m, "TrainingSet")
      .def(py::init<Index, std::vector<Subset>>(), py::arg("ground_size"), py::arg("subsets"))
      .def_property_readonly("ground_size", &TrainingSet::ground_size)
      .def_property_readonly("count", &TrainingSet::count)
      .def_property_readonly("max_subset_size", &TrainingSet::max_subset_size)
      .def_property_readonly("subsets", &TrainingSet::subsets);

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform", &RngStream::uniform)
      .def("uniform_index", &RngStream::uniform_index, py::arg("bound"));

  py::class_<EigenSystem>(m, "EigenSystem")
      .def_readonly("values", &EigenSystem::values)
      .def_readonly("vectors", &EigenSystem::vectors);

  py::enum_<FitMode>(m, "FitMode")
      .value("batch", FitMode::kBatch)
      .value("stochastic", FitMode::kStochastic);

  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("step_size", &FitConfig::step_size)
      .def_readwrite("max_iter", &FitConfig::max_iter)
      .def_readwrite("mode", &FitConfig::mode)
      .def_readwrite("minibatch_size", &FitConfig::minibatch_size)
      .def_readwrite("tol", &FitConfig::tol)
      .def_readwrite("seed", &FitConfig::seed)
      .def_readwrite("pd_floor", &FitConfig::pd_floor);

  py::class_<FitRecord>(m, "FitRecord")
      .def_readonly("iteration", &FitRecord::iteration)
      .def_readonly("seconds", &FitRecord::seconds)
      .def_readonly("log_likelihood", &FitRecord::log_likelihood)
      .def_readonly("min_eigenvalue", &FitRecord::min_eigenvalue);

  py::class_<FitHistory>(m, "FitHistory").def_readonly("records", &FitHistory::records);

  py::class_<SampleReport>(m, "SampleReport")
      .def_readonly("subset", &SampleReport::subset)
      .def_readonly("elementary", &SampleReport::elementary)
      .def_readonly("phase1_seconds", &SampleReport::phase1_seconds)
      .def_readonly("phase2_seconds", &SampleReport::phase2_seconds);

  py::class_<PartitionPlan>(m, "PartitionPlan")
      .def_readonly("z", &PartitionPlan::z)
      .def_readonly("groups", &PartitionPlan::groups)
      .def_readonly("unions", &PartitionPlan::unions);

  // Kronecker linear algebra.
  m.def("kron_product", &kron_product, py::arg("a"), py::arg("b"));
  m.def("partial_trace_1", &partial_trace_1, py::arg("m"), py::arg("n1"), py::arg("n2"));
  m.def("partial_trace_2", &partial_trace_2, py::arg("m"), py::arg("n1"), py::arg("n2"));
  m.def("rearrange", &rearrange, py::arg("m"), py::arg("n1"), py::arg("n2"));
  m.def("sym_eig", &sym_eig, py::arg("m"));
  m.def(
      "leading_singular_pair",
      [](const Matrix& r, double tol, int max_iter) {
        const SingularPair p = leading_singular_pair(r, tol, max_iter);
        return py::make_tuple(p.u, p.sigma, p.v);
      },
      py::arg("r"), py::arg("tol") = 1e-10, py::arg("max_iter") = 1000);

  // Model quantities.
  m.def("kron_submatrix", &kron_submatrix, py::arg("kernel"), py::arg("subset"));
  m.def("log_det_norm", &log_det_norm, py::arg("kernel"));
  m.def("log_likelihood",
        py::overload_cast<const KronKernel&, const TrainingSet&>(&log_likelihood),
        py::arg("kernel"), py::arg("data"));
  m.def(
      "log_likelihood_dense",
      [](const Matrix& l, const TrainingSet& t) {
        return log_likelihood_dense(SpdMatrix::checked(l), t);
      },
      py::arg("l"), py::arg("data"));
  m.def(
      "grad_delta",
      [](const Matrix& l, const TrainingSet& t) { return grad_delta(SpdMatrix::checked(l), t); },
      py::arg("l"), py::arg("data"));
  m.def(
      "marginal_kernel", [](const Matrix& l) { return marginal_kernel(SpdMatrix::checked(l)); },
      py::arg("l"));
  m.def("subset_prob", &subset_prob, py::arg("kernel"), py::arg("subset"));

  // Learning.
  m.def(
      "theta_batch",
      [](const KronKernel& k, const TrainingSet& t) { return theta_batch(k, t).densify(); },
      py::arg("kernel"), py::arg("data"));
  m.def("fit_krk", &fit_krk, py::arg("kernel"), py::arg("data"), py::arg("config"));
  m.def(
      "fit_picard",
      [](const Matrix& l0, const TrainingSet& t, const FitConfig& cfg) {
        auto [l, history] = fit_picard(SpdMatrix::checked(l0), t, cfg);
        return py::make_tuple(l.mat(), history);
      },
      py::arg("l0"), py::arg("data"), py::arg("config"));
  m.def("fit_joint", &fit_joint, py::arg("kernel"), py::arg("data"), py::arg("config"));
  m.def("random_gram_matrix", &random_gram_matrix, py::arg("n"), py::arg("rng"));

  // Sampling.
  m.def("sample_kron", &sample_kron, py::arg("kernel"), py::arg("rng"));
  m.def(
      "sample_dense",
      [](const Matrix& l, RngStream& rng) { return sample_dense(sym_eig(l), rng); },
      py::arg("l"), py::arg("rng"));
  m.def("enumerate_distribution", &enumerate_distribution, py::arg("kernel"));
  m.def("enumerate_distribution_dense", &enumerate_distribution_dense, py::arg("l"));
  m.def("expected_sample_size", &expected_sample_size, py::arg("values"));

  // Partitioning.
  m.def("greedy_partition", &greedy_partition, py::arg("data"), py::arg("z"));

  // Synthetic data.
  m.def(
      "synth_kernel",
      [](const std::vector<Index>& dims, RngStream& rng) {
        return synth_kernel(std::span<const Index>(dims.data(), dims.size()), rng);
      },
      py::arg("dims"), py::arg("rng"));
  m.def("synth_subsets", &synth_subsets, py::arg("kernel"), py::arg("count"),
        py::arg("min_size"), py::arg("max_size"), py::arg("rng"));

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
