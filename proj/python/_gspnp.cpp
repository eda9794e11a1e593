#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "pnp/algorithms.hpp"
#include "pnp/denoiser.hpp"
#include "pnp/errors.hpp"
#include "pnp/experiment.hpp"
#include "pnp/forward_operators.hpp"
#include "pnp/image_io.hpp"
#include "pnp/kernel_bank.hpp"
#include "pnp/metrics.hpp"
#include "pnp/training.hpp"

namespace py = pybind11;
using namespace pnp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) arrays map onto fields; fields come back as (H, W, C).
Field toField(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("expected a 2-D or 3-D array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Field f(h, w, c);
  std::memcpy(f.data().data(), a.data(), f.size() * sizeof(double));
  return f;
}

Array toArray(const Field& f) {
  Array a({f.height(), f.width(), f.channels()});
  std::memcpy(a.mutable_data(), f.data().data(), f.size() * sizeof(double));
  return a;
}

Kernel toKernel(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("kernel must be a 2-D array");
  const auto* p = a.data();
  return Kernel(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                std::vector<double>(p, p + a.size()));
}

Array kernelArray(const Kernel& k) {
  Array a({k.rows(), k.cols()});
  std::memcpy(a.mutable_data(), k.taps().data(), k.taps().size() * sizeof(double));
  return a;
}

DegradationModel makeModel(const std::string& kind, const py::object& kernel, int scale, const py::object& mask,
                           double noise) {
  DegradationModel m;
  m.noiseStd = noise;
  if (kind == "deblur") {
    m.kind = Deblur{toKernel(kernel.cast<Array>())};
  } else if (kind == "sr") {
    m.kind = SuperRes{toKernel(kernel.cast<Array>()), scale};
  } else if (kind == "inpaint") {
    m.kind = Inpaint{toField(mask.cast<Array>())};
  } else {
    throw InvalidArgument("kind must be deblur, sr or inpaint");
  }
  m.validate();
  return m;
}

py::dict traceDict(const IterateTrace& t) {
  py::list records;
  for (const auto& r : t.records) {
    py::dict d;
    d["k"] = r.k;
    d["objective"] = r.objective;
    d["lyapunov"] = r.lyapunov;
    d["residual"] = r.residual;
    d["psnr"] = r.psnr ? py::cast(*r.psnr) : py::none();
    d["tau"] = r.tau;
    d["shrinks"] = r.shrinks;
    records.append(d);
  }
  py::dict out;
  out["algorithm"] = toString(t.algorithm);
  out["records"] = records;
  out["initial_objective"] = t.initialObjective ? py::cast(*t.initialObjective) : py::none();
  out["stop"] = toString(t.stop);
  out["warnings"] = t.warnings;
  out["csv"] = traceCsv(t);
  return out;
}

}  // namespace

PYBIND11_MODULE(_gspnp, m) {
  m.doc() = "Gradient-step and proximal plug-and-play restoration";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<UnsupportedOperation>(m, "UnsupportedOperation", base.ptr());
  py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("read_image", [](const std::filesystem::path& p) { return toArray(readImage(p)); });
  m.def("write_image", [](const std::filesystem::path& p, const Array& a) { writeImage(p, toField(a)); });
  m.def("psnr", [](const Array& x, const Array& ref) { return psnr(toField(x), toField(ref)); });
  m.def("add_noise", [](const Array& x, double nu, std::uint64_t seed) {
    return toArray(addGaussianNoise(toField(x), nu, seed));
  });
  m.def("gaussian_kernel", [](double sx, double sy, double theta, int size) {
    return kernelArray(makeGaussianKernel(sx, sy, theta, size));
  }, py::arg("sigma_x"), py::arg("sigma_y"), py::arg("theta") = 0.0, py::arg("size") = 9);
  m.def("kernel", [](const std::string& ref) { return kernelArray(resolveKernel(ref)); },
        "Kernel from a reference such as gauss:1.6:1.6:0:9, motion-bank:0 or a file");
  m.def("random_mask", [](int h, int w, double p, std::uint64_t seed) { return toArray(randomMask(h, w, p, seed)); });

  py::class_<DataFidelity>(m, "Fidelity")
      .def(py::init([](const std::string& kind, const Array& y, py::object shape, const py::object& kernel,
                       int scale, const py::object& mask, double noise, bool indicator) {
             DegradationModel model = makeModel(kind, kernel, scale, mask, noise);
             Field obs = toField(y);
             if (indicator) return DataFidelity::indicator(std::move(model), std::move(obs));
             Shape s = obs.shape();
             if (!shape.is_none()) {
               auto t = shape.cast<std::tuple<int, int, int>>();
               s = Shape{std::get<0>(t), std::get<1>(t), std::get<2>(t)};
             }
             return DataFidelity::quadratic(std::move(model), std::move(obs), s);
           }),
           py::arg("kind"), py::arg("observation"), py::arg("signal_shape") = py::none(),
           py::arg("kernel") = py::none(), py::arg("scale") = 2, py::arg("mask") = py::none(),
           py::arg("noise") = 0.0, py::arg("indicator") = false)
      .def("value", [](const DataFidelity& f, const Array& x) { return f.value(toField(x)); })
      .def("forward", [](const DataFidelity& f, const Array& x) { return toArray(f.forward(toField(x))); })
      .def("adjoint", [](const DataFidelity& f, const Array& r) { return toArray(f.adjoint(toField(r))); })
      .def("grad", [](const DataFidelity& f, const Array& x) { return toArray(gradF(f, toField(x))); })
      .def("prox", [](const DataFidelity& f, const Array& z, double tau) { return toArray(prox(f, toField(z), tau)); })
      .def("initial_estimate", [](const DataFidelity& f) { return toArray(initialEstimate(f)); })
      .def_property_readonly("lipschitz", &DataFidelity::lipschitzGrad);

  py::class_<PotentialDenoiser>(m, "Denoiser")
      .def_static("load", [](const std::filesystem::path& p, double sigma, double alpha) {
             return netDenoiser(std::make_shared<const SmoothNet>(loadModel(p).net), sigma, alpha);
           }, py::arg("path"), py::arg("sigma"), py::arg("alpha") = 1.0)
      .def_static("filter", [](double wI, const Array& k, double wK, std::tuple<int, int, int> shape) {
             auto [h, w, c] = shape;
             return analyticFilterDenoiser(wI, toKernel(k), wK, Shape{h, w, c});
           }, py::arg("identity_weight"), py::arg("kernel"), py::arg("kernel_weight"), py::arg("shape"))
      .def_readwrite("sigma", &PotentialDenoiser::sigma)
      .def_readwrite("alpha", &PotentialDenoiser::alpha)
      .def("__call__", [](const PotentialDenoiser& d, const Array& x) { return toArray(denoise(d, toField(x))); })
      .def("g", [](const PotentialDenoiser& d, const Array& x) { return gSigma(d, toField(x)); })
      .def("grad_g", [](const PotentialDenoiser& d, const Array& x) { return toArray(gradGSigma(d, toField(x))); })
      .def("phi", [](const PotentialDenoiser& d, const Array& z) { return phiAtDenoised(d, toField(z)); },
           "phi at D(z)")
      .def("jacobian_norm", [](const PotentialDenoiser& d, const Array& x, int iters, std::uint64_t seed) {
             return jacobianSpectralNorm(d, toField(x), iters, seed);
           }, py::arg("x"), py::arg("iterations") = 50, py::arg("seed") = 0);

  py::class_<PnPParams>(m, "Params")
      .def_static("defaults", [](const std::string& a) { return PnPParams::defaults(algorithmFromString(a)); })
      .def_readwrite("lam", &PnPParams::lambda)
      .def_readwrite("tau0", &PnPParams::tau0)
      .def_readwrite("gamma", &PnPParams::gamma)
      .def_readwrite("eta", &PnPParams::eta)
      .def_readwrite("beta", &PnPParams::beta)
      .def_readwrite("max_iters", &PnPParams::maxIters)
      .def_readwrite("rel_tol", &PnPParams::relTol)
      .def_readwrite("tau_min", &PnPParams::tauMin)
      .def_readwrite("max_shrinks", &PnPParams::maxShrinks)
      .def_readwrite("init_denoise_sigma", &PnPParams::initDenoiseSigma)
      .def_readwrite("seed", &PnPParams::seed);

  m.def("run", [](const std::string& algorithm, const PnPParams& params, const DataFidelity& fid,
                  const PotentialDenoiser& d, const Array& init, const py::object& clean) {
          std::optional<Field> ref;
          if (!clean.is_none()) ref = toField(clean.cast<Array>());
          const Field x0 = toField(init);
          const Algorithm algo = algorithmFromString(algorithm);
          RunResult r;
          {
            py::gil_scoped_release release;
            r = runAlgorithm(algo, params, fid, d, x0, ref ? &*ref : nullptr);
          }
          return py::make_tuple(toArray(r.output), traceDict(r.trace));
        },
        py::arg("algorithm"), py::arg("params"), py::arg("fidelity"), py::arg("denoiser"), py::arg("init"),
        py::arg("clean") = py::none(), "Returns (output, trace dict)");

  m.def("restore", [](const std::string& json, const std::filesystem::path& baseDir) {
          const ExperimentConfig cfg = configFromJson(json, baseDir);
          RestoreOutcome o;
          {
            py::gil_scoped_release release;
            o = restoreOnce(cfg);
          }
          py::dict out;
          out["output"] = toArray(o.run.output);
          out["observation"] = toArray(o.observation);
          out["observed_psnr"] = o.observedPsnr;
          out["final_psnr"] = o.finalPsnr;
          out["best_psnr"] = o.bestPsnr;
          out["iterations"] = o.iterations;
          out["trace"] = traceDict(o.run.trace);
          return out;
        },
        py::arg("config_json"), py::arg("base_dir") = std::filesystem::path{},
        "Runs one restoration from a JSON experiment config and writes its outputs");
}
