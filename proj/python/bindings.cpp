#include "neuronal/errors.hpp"
#include "neuronal/harness.hpp"
#include "neuronal/ntk.hpp"
#include "neuronal/pool.hpp"
#include "neuronal/stream.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace neuronal;
using nn::Matrix;
using nn::Vector;

namespace {

// Points arrive as rows (T x d) on the Python side; the core stores them as columns.
Matrix columns(const Eigen::Ref<const Matrix>& rows) { return rows.transpose(); }

data::NoiseMode parse_mode(const std::string& mode) {
    if (mode == "hard") return data::NoiseMode::HardMargin;
    if (mode == "tsybakov") return data::NoiseMode::Tsybakov;
    throw ConfigError("unknown noise mode '" + mode + "' (expected hard or tsybakov)");
}

}  // namespace

PYBIND11_MODULE(_neuronal, m) {
    m.doc() = "Native core of neuronal_al";

    static py::exception<Error> base(m, "NeuronalError", PyExc_RuntimeError);
    static py::exception<Error> config(m, "ConfigError", base.ptr());
    static py::exception<Error> shape(m, "ShapeError", base.ptr());
    static py::exception<Error> data_error(m, "DataError", base.ptr());
    static py::exception<Error> divergence(m, "DivergenceError", base.ptr());
    static py::exception<Error> parameter(m, "ParameterError", base.ptr());
    static py::exception<Error> conditioning(m, "ConditioningError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            switch (e.category()) {
                case ErrorCategory::Config: config(e.what()); break;
                case ErrorCategory::Shape: shape(e.what()); break;
                case ErrorCategory::Data: data_error(e.what()); break;
                case ErrorCategory::Divergence: divergence(e.what()); break;
                case ErrorCategory::Parameter: parameter(e.what()); break;
                case ErrorCategory::Conditioning: conditioning(e.what()); break;
                default: base(e.what()); break;
            }
        }
    });

    py::class_<nn::Params>(m, "Net")
        .def(py::init([](int input_dim, int width, int depth, int output_dim, std::uint64_t seed) {
                 return nn::init_params({input_dim, width, depth, output_dim}, seed);
             }),
             py::arg("input_dim"), py::arg("width"), py::arg("depth"), py::arg("output_dim"),
             py::arg("seed") = 0)
        .def_readwrite("weights", &nn::Params::weights)
        .def_property_readonly("size", &nn::Params::size)
        .def("predict", [](const nn::Params& p, const Vector& x) { return nn::predict(p, x); })
        .def("gradient",
             [](const nn::Params& p, const Vector& x, const Vector& upstream) {
                 const auto fwd = nn::forward(p, x);
                 return nn::backward(p, fwd.cache, upstream).weights;
             },
             "Gradient of <upstream, f(x)> for every weight matrix.");

    m.def("beta", &stream::beta, py::arg("t"), py::arg("num_classes"), py::arg("s_norm"),
          py::arg("horizon"), py::arg("delta"));
    m.def("decide",
          [](const Vector& scores, double gamma, double beta_t) {
              const auto d = stream::decide(scores, gamma, beta_t);
              py::dict out;
              out["k_hat"] = d.k_hat;
              out["k_circ"] = d.k_circ;
              out["gap"] = d.gap;
              out["fired"] = d.fired;
              return out;
          },
          py::arg("scores"), py::arg("gamma"), py::arg("beta"));

    m.def("igw_distribution",
          [](const Vector& gaps, double mu, double gamma) {
              const auto d = pool::igw_distribution(gaps, mu, gamma);
              return py::make_tuple(d.probs, d.i_hat);
          },
          py::arg("gaps"), py::arg("mu"), py::arg("gamma"), "Returns (probabilities, argmin index).");
    m.def("min_admissible_mu", &pool::min_admissible_mu, py::arg("gaps"), py::arg("gamma"));

    m.def("ntk_matrix", [](const Matrix& points, int depth) { return ntk::ntk_matrix(columns(points), depth); },
          py::arg("points"), py::arg("depth") = 2, "Kernel of the rows of `points` (unit norm).");
    m.def("expand_multiclass", &ntk::expand_multiclass, py::arg("h"), py::arg("num_classes"));
    m.def("complexity_terms",
          [](const Matrix& H, const Vector& h) {
              const auto r = ntk::complexity_terms(H, h);
              py::dict out;
              out["lambda0"] = r.lambda0;
              out["S"] = r.S;
              out["L_H"] = r.L_H;
              out["lower_bound"] = r.lower_bound;
              out["effective_dim"] = r.effective_dim;
              out["jitter"] = r.jitter;
              out["bound_holds"] = r.bound_holds;
              return out;
          },
          py::arg("H"), py::arg("h"));
    m.def("mc_gram_oracle",
          [](const Matrix& points, int depth, int width, int num_classes, int n_nets, std::uint64_t seed) {
              const auto est = ntk::mc_gram_oracle(columns(points), depth, width, num_classes, n_nets, seed);
              return py::make_tuple(est.mean, est.std_error);
          },
          py::arg("points"), py::arg("depth"), py::arg("width"), py::arg("num_classes") = 1,
          py::arg("n_nets") = 16, py::arg("seed") = 0, "Returns (mean, standard error).");

    m.def("synth",
          [](int dim, int num_classes, std::size_t n, double margin, const std::string& mode, double alpha,
             double spread, double ramp, std::uint64_t seed) {
              data::SynthSpec spec;
              spec.dim = dim;
              spec.num_classes = num_classes;
              spec.n = n;
              spec.margin = margin;
              spec.mode = parse_mode(mode);
              spec.alpha = alpha;
              spec.spread = spread;
              spec.ramp = ramp;
              spec.seed = seed;
              const auto ds = data::synth(spec);
              return py::make_tuple(Matrix(ds.inputs.transpose()), ds.labels, Matrix(ds.posterior.transpose()));
          },
          py::arg("dim") = 10, py::arg("num_classes") = 3, py::arg("n") = 1000, py::arg("margin") = 0.2,
          py::arg("mode") = "hard", py::arg("alpha") = 1.0, py::arg("spread") = 1.0, py::arg("ramp") = 0.1,
          py::arg("seed") = 0, "Returns (inputs N x d, labels, posterior N x K).");

    m.def("load_normalize",
          [](const std::string& path, const std::string& format) {
              const auto ds = data::load_normalize(path, data::parse_format(format));
              return py::make_tuple(Matrix(ds.inputs.transpose()), ds.labels, ds.num_classes);
          },
          py::arg("path"), py::arg("format") = "csv");

    m.def("run_experiment",
          [](const std::string& config_json) {
              const auto config = harness::config_from_json(harness::json::parse(config_json));
              std::vector<std::string> out;
              {
                  py::gil_scoped_release release;
                  for (const auto& r : harness::run_experiment(config).records) out.push_back(r.dump());
              }
              return out;
          },
          py::arg("config_json"), "Runs an experiment; returns its records as JSON strings.");
    m.def("default_config",
          [](const std::string& algorithm) {
              harness::ExperimentConfig c;
              c.algorithm = harness::parse_algorithm(algorithm);
              return harness::to_json(c).dump();
          },
          py::arg("algorithm") = "neuronal-stream");
}
