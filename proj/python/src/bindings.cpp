#include "cpmiss/config.hpp"
#include "cpmiss/conformal.hpp"
#include "cpmiss/error.hpp"
#include "cpmiss/harness.hpp"
#include "cpmiss/metrics.hpp"
#include "cpmiss/models.hpp"
#include "cpmiss/synth.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

namespace py = pybind11;
using namespace cpmiss;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// NaN marks a missing covariate.
MaskedSample sample_from(const double* row, std::size_t d, std::optional<double> y) {
    std::vector<std::optional<double>> x(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (!std::isnan(row[j])) x[j] = row[j];
    }
    return MaskedSample(std::move(x), y);
}

MaskedDataset dataset_from(const Array& X, const std::optional<Array>& y) {
    if (X.ndim() != 2) throw DimensionError("X must be a 2-d array");
    const auto n = static_cast<std::size_t>(X.shape(0));
    const auto d = static_cast<std::size_t>(X.shape(1));
    if (y && (y->ndim() != 1 || static_cast<std::size_t>(y->shape(0)) != n)) {
        throw DimensionError("y must be a 1-d array with one entry per row of X");
    }
    MaskedDataset ds(d);
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<double> yi;
        if (y) yi = y->data()[i];
        ds.push_back(sample_from(X.data() + i * d, d, yi));
    }
    return ds;
}

MaskedSample single_sample(const Array& x) {
    if (x.ndim() != 1) throw DimensionError("x must be a 1-d array");
    return sample_from(x.data(), static_cast<std::size_t>(x.shape(0)), std::nullopt);
}

RegressorKind parse_kind(const std::string& kind) {
    if (kind == "least_squares") return RegressorKind::LeastSquares;
    if (kind == "quantile") return RegressorKind::QuantilePair;
    throw ConfigError("kind must be 'least_squares' or 'quantile'");
}

py::dict report_dict(const EvalReport& r) {
    py::list cells;
    for (Method m : r.methods) {
        for (const auto& g : r.groups) {
            if (!r.has(m, g)) continue;
            const auto& st = r.at(m, g);
            py::dict c;
            c["method"] = to_string(m);
            c["group"] = g;
            c["coverage"] = st.coverage();
            c["mean_length"] = st.mean_length();
            c["n_points"] = st.n_points;
            c["n_infinite"] = st.n_infinite;
            cells.append(c);
        }
    }
    py::dict out;
    out["reps"] = r.reps;
    out["groups"] = r.groups;
    out["cells"] = cells;
    out["warnings"] = r.warnings;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Conformal prediction intervals with missing covariates";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    m.def(
        "weighted_quantile",
        [](const std::vector<double>& values, const std::vector<double>& weights, double inf_mass, double level) {
            if (values.size() != weights.size()) throw DimensionError("values and weights differ in length");
            WeightedEmpirical d;
            for (std::size_t i = 0; i < values.size(); ++i) d.atoms.push_back({values[i], weights[i]});
            d.inf_mass = inf_mass;
            return weighted_quantile(d, level);
        },
        py::arg("values"), py::arg("weights"), py::arg("inf_mass"), py::arg("level"));
    m.def(
        "conformal_quantile", [](const std::vector<double>& s, double alpha) { return conformal_quantile(s, alpha); },
        py::arg("scores"), py::arg("alpha"));
    m.def(
        "heom_distance",
        [](const Array& a, const Array& b, const std::vector<double>& ranges) {
            return heom_distance(single_sample(a), single_sample(b), ranges);
        },
        py::arg("a"), py::arg("b"), py::arg("ranges"), "NaN entries count as missing.");
    m.def(
        "example1_conditional_variance",
        [](const std::string& mask, double x_obs, double beta1, double beta2, double mu1, double mu2, double sigma1,
           double sigma2, double rho, double noise_sd, double tau1, double tau2) {
            return example1_conditional_variance({beta1, beta2, mu1, mu2, sigma1, sigma2, rho, noise_sd, tau1, tau2},
                                                 Mask::parse(mask), x_obs);
        },
        py::arg("mask"), py::arg("x_obs"), py::arg("beta1") = 1.0, py::arg("beta2") = 1.0, py::arg("mu1") = 0.0,
        py::arg("mu2") = 0.0, py::arg("sigma1") = 1.0, py::arg("sigma2") = 1.0, py::arg("rho") = 0.0,
        py::arg("noise_sd") = 1.0, py::arg("tau1") = 0.0, py::arg("tau2") = 0.0);

    py::class_<FittedPipeline>(m, "Pipeline")
        .def("predict", [](const FittedPipeline& p, const Array& x) { return p.predict(single_sample(x)); })
        .def("predict_quantiles",
             [](const FittedPipeline& p, const Array& x) { return p.predict_quantiles(single_sample(x)); })
        .def_property_readonly("ridge_fallback", [](const FittedPipeline& p) { return p.regressor.ridge_fallback; });

    m.def(
        "fit_pipeline",
        [](const Array& X, const Array& y, const std::string& kind, double alpha) {
            return fit_pipeline(dataset_from(X, y), parse_kind(kind), alpha);
        },
        py::arg("X"), py::arg("y"), py::arg("kind") = "least_squares", py::arg("alpha") = 0.1,
        "Chained-equations imputation followed by a linear regressor. NaN marks missing covariates.");

    m.def(
        "predict_intervals",
        [](const std::string& method, const Array& X_train, const Array& y_train, const Array& X_calib,
           const Array& y_calib, const Array& X_test, double alpha, double rho, std::optional<double> bandwidth) {
            const Method meth = parse_method(method);
            const auto train = dataset_from(X_train, y_train);
            const auto calib = dataset_from(X_calib, y_calib);
            const auto test = dataset_from(X_test, std::nullopt);
            const bool quantile = uses_quantile_pipeline(meth);
            const auto pipe =
                fit_pipeline(train, quantile ? RegressorKind::QuantilePair : RegressorKind::LeastSquares, alpha);
            EngineSettings s;
            s.alpha = alpha;
            s.rho = rho;
            s.bandwidth = bandwidth;
            ConformalEngine engine(quantile ? nullptr : &pipe, quantile ? &pipe : nullptr, train, calib, s);
            std::vector<double> lower, upper;
            py::list flags;
            for (const auto& t : test) {
                const auto iv = engine.predict(meth, t);
                lower.push_back(iv.lower());
                upper.push_back(iv.upper());
                flags.append(to_string(iv.flag));
            }
            return py::make_tuple(py::array_t<double>(static_cast<py::ssize_t>(lower.size()), lower.data()),
                                  py::array_t<double>(static_cast<py::ssize_t>(upper.size()), upper.data()), flags);
        },
        py::arg("method"), py::arg("X_train"), py::arg("y_train"), py::arg("X_calib"), py::arg("y_calib"),
        py::arg("X_test"), py::arg("alpha") = 0.1, py::arg("rho") = 0.99, py::arg("bandwidth") = py::none(),
        "Returns (lower, upper, flags) for every row of X_test.");

    m.def(
        "run_experiment",
        [](const std::string& config_text, const std::map<std::string, std::string>& overrides) {
            auto file = ConfigFile::parse(config_text);
            for (const auto& [k, v] : overrides) file.set(k, v);
            const auto cfg = experiment_from_config(file);
            EvalReport r;
            {
                py::gil_scoped_release release;
                r = run_experiment(cfg);
            }
            return report_dict(r);
        },
        py::arg("config_text"), py::arg("overrides") = std::map<std::string, std::string>{},
        "Runs a synthetic benchmark described in config-file syntax; keys in `overrides` win.");
}
