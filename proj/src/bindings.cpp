// pybind11 bindings exposing the main operations to Python as tdekit._core.
// Waveforms cross the boundary as float64 numpy arrays: (n,) for mono,
// (n, 2) for stereo; embeddings as (n, d); spectrograms as (128, 128, 2).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tdekit/bench.hpp"
#include "tdekit/trainer.hpp"

namespace py = pybind11;
using namespace tde;

namespace {

MonoClip mono_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a,
                         double rate) {
  py::buffer_info buf = a.request();
  if (buf.ndim != 1) throw std::runtime_error("expected a 1-d waveform array");
  MonoClip clip;
  clip.rate = rate;
  const double* p = static_cast<const double*>(buf.ptr);
  clip.samples.assign(p, p + buf.shape[0]);
  return clip;
}

StereoClip stereo_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a,
                             double rate) {
  py::buffer_info buf = a.request();
  if (buf.ndim != 2 || buf.shape[1] != 2)
    throw std::runtime_error("expected an (n, 2) stereo array");
  StereoClip clip;
  clip.left.rate = clip.right.rate = rate;
  const double* p = static_cast<const double*>(buf.ptr);
  const std::size_t n = static_cast<std::size_t>(buf.shape[0]);
  clip.left.samples.resize(n);
  clip.right.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    clip.left.samples[i] = p[2 * i];
    clip.right.samples[i] = p[2 * i + 1];
  }
  return clip;
}

py::array_t<double> mono_to_array(const MonoClip& clip) {
  py::array_t<double> out(static_cast<py::ssize_t>(clip.size()));
  std::copy(clip.samples.begin(), clip.samples.end(), out.mutable_data());
  return out;
}

py::array_t<double> stereo_to_array(const StereoClip& clip) {
  py::array_t<double> out({static_cast<py::ssize_t>(clip.size()), py::ssize_t(2)});
  auto r = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    r(i, 0) = clip.left.samples[static_cast<std::size_t>(i)];
    r(i, 1) = clip.right.samples[static_cast<std::size_t>(i)];
  }
  return out;
}

py::array_t<double> matrix_to_array(const Eigen::MatrixXd& m) {
  py::array_t<double> out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  auto r = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i)
    for (py::ssize_t j = 0; j < r.shape(1); ++j) r(i, j) = m(i, j);
  return out;
}

Eigen::MatrixXd matrix_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  py::buffer_info buf = a.request();
  if (buf.ndim != 2) throw std::runtime_error("expected a 2-d array");
  Eigen::MatrixXd m(buf.shape[0], buf.shape[1]);
  const double* p = static_cast<const double*>(buf.ptr);
  for (py::ssize_t i = 0; i < buf.shape[0]; ++i)
    for (py::ssize_t j = 0; j < buf.shape[1]; ++j) m(i, j) = p[i * buf.shape[1] + j];
  return m;
}

py::dict estimate_to_dict(const DelayEstimate& e) {
  py::dict d;
  d["delay_ms"] = e.delay_s * 1000.0;
  d["method"] = e.method;
  d["n_votes"] = e.votes.size();
  py::array_t<double> votes(static_cast<py::ssize_t>(e.votes.size()));
  std::copy(e.votes.begin(), e.votes.end(), votes.mutable_data());
  d["votes_s"] = votes;
  if (e.inlier_count) d["inlier_count"] = *e.inlier_count;
  if (e.angle_deg) d["angle_deg"] = *e.angle_deg;
  return d;
}

Aggregation agg_from_name(const std::string& s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "mode") return Aggregation::ModeRansac;
  throw std::runtime_error("aggregation must be 'mean' or 'mode'");
}

VoteMode vote_mode_from_name(const std::string& s) {
  if (s == "argmax") return VoteMode::Argmax;
  if (s == "expectation") return VoteMode::Expectation;
  throw std::runtime_error("vote mode must be 'argmax' or 'expectation'");
}

/// Thin handle pairing a checkpoint's parameters with the estimator.
class Model {
 public:
  explicit Model(const std::string& checkpoint) : params_(load_checkpoint(checkpoint)) {}
  explicit Model(const ModelParams& params) : params_(params) {}

  py::array_t<double> embed(py::array_t<double, py::array::c_style | py::array::forcecast> wave,
                            double rate, int window, int step) const {
    const EmbeddingSequence seq = embed_sequence(params_, mono_from_array(wave, rate), window, step);
    return matrix_to_array(seq.vectors);
  }

  py::dict estimate(py::array_t<double, py::array::c_style | py::array::forcecast> stereo,
                    double rate, int window, int step, const std::string& agg,
                    const std::string& vote_mode, double max_delay_ms, int max_votes) const {
    EstimateConfig cfg;
    cfg.window = window;
    cfg.step = step;
    cfg.agg = agg_from_name(agg);
    cfg.vote_mode = vote_mode_from_name(vote_mode);
    if (max_delay_ms > 0) cfg.max_delay_s = max_delay_ms / 1000.0;
    cfg.max_votes = max_votes;
    return estimate_to_dict(estimate_delay(params_, stereo_from_array(stereo, rate), cfg));
  }

  void save(const std::string& path) const { save_checkpoint(params_, path); }
  std::size_t n_params() const { return params_.total_params(); }
  int embed_dim() const { return params_.arch.embed_dim; }

 private:
  ModelParams params_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stereo time delay estimation toolkit (C++ core)";

  // Audio
  m.def(
      "load_wav",
      [](const std::string& path) -> py::object {
        auto v = load_wav(path);
        if (std::holds_alternative<MonoClip>(v)) {
          const auto& c = std::get<MonoClip>(v);
          return py::make_tuple(mono_to_array(c), c.rate);
        }
        const auto& c = std::get<StereoClip>(v);
        return py::make_tuple(stereo_to_array(c), c.rate());
      },
      py::arg("path"), "Read a WAV file; returns (samples, rate) with (n,) or (n, 2) samples.");
  m.def(
      "save_wav",
      [](const std::string& path, py::array_t<double, py::array::c_style | py::array::forcecast> a,
         double rate, const std::string& fmt) {
        const WavFormat f = fmt == "float32" ? WavFormat::Float32 : WavFormat::Pcm16;
        if (a.request().ndim == 1)
          save_wav(mono_from_array(a, rate), path, f);
        else
          save_wav(stereo_from_array(a, rate), path, f);
      },
      py::arg("path"), py::arg("samples"), py::arg("rate"), py::arg("format") = "pcm16");
  m.def(
      "resample",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> a, double rate,
         double target) { return mono_to_array(resample(mono_from_array(a, rate), target)); },
      py::arg("samples"), py::arg("rate"), py::arg("target_rate"));
  m.def(
      "stft_features",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> a, double rate) {
        const Spectrogram s = stft_features(mono_from_array(a, rate));
        py::array_t<double> out({py::ssize_t(Spectrogram::kBins), py::ssize_t(Spectrogram::kFrames),
                                 py::ssize_t(2)});
        auto r = out.mutable_unchecked<3>();
        for (int b = 0; b < Spectrogram::kBins; ++b)
          for (int f = 0; f < Spectrogram::kFrames; ++f) {
            r(b, f, 0) = s.at(b, f, 0);
            r(b, f, 1) = s.at(b, f, 1);
          }
        return out;
      },
      py::arg("window"), py::arg("rate") = 16000.0,
      "Magnitude+phase spectrogram of one analysis window, shape (128, 128, 2).");

  // Classic estimators
  auto curve_out = [](const CorrelationCurve& c) {
    py::array_t<double> vals(static_cast<py::ssize_t>(c.values.size()));
    std::copy(c.values.begin(), c.values.end(), vals.mutable_data());
    py::array_t<long> lags(static_cast<py::ssize_t>(c.values.size()));
    auto lr = lags.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < lr.shape(0); ++i) lr(i) = static_cast<long>(i) - c.max_lag;
    return py::make_tuple(lags, vals);
  };
  m.def(
      "cross_correlation",
      [curve_out](py::array_t<double, py::array::c_style | py::array::forcecast> x1,
                  py::array_t<double, py::array::c_style | py::array::forcecast> x2, int max_lag,
                  double rate) {
        return curve_out(cross_correlation(mono_from_array(x1, rate), mono_from_array(x2, rate),
                                           max_lag));
      },
      py::arg("x1"), py::arg("x2"), py::arg("max_lag"), py::arg("rate") = 16000.0,
      "Returns (lags, values).");
  m.def(
      "gcc_phat",
      [curve_out](py::array_t<double, py::array::c_style | py::array::forcecast> x1,
                  py::array_t<double, py::array::c_style | py::array::forcecast> x2, int max_lag,
                  double rate) {
        return curve_out(gcc_phat(mono_from_array(x1, rate), mono_from_array(x2, rate), max_lag));
      },
      py::arg("x1"), py::arg("x2"), py::arg("max_lag"), py::arg("rate") = 16000.0);
  m.def(
      "classic_estimate",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> stereo, double rate,
         int votes, int window, const std::string& agg, double max_delay_ms) {
        const int max_lag = max_delay_ms > 0
                                ? static_cast<int>(std::ceil(max_delay_ms / 1000.0 * rate))
                                : kFallbackMaxLag;
        return estimate_to_dict(
            classic_estimate(stereo_from_array(stereo, rate), votes, window, agg_from_name(agg),
                             max_lag));
      },
      py::arg("stereo"), py::arg("rate") = 16000.0, py::arg("votes") = 128,
      py::arg("window") = 1024, py::arg("agg") = "mean", py::arg("max_delay_ms") = 0.0,
      "GCC-PHAT voting estimate of a stereo clip; returns a dict.");

  // Simulation
  m.def(
      "simulate_scene",
      [](int room_id, double angle_deg, double distance_m, double rt60, double snr_db,
         double duration_s, std::uint64_t seed, const std::string& signal) {
        ManifestRow row;
        row.room_id = room_id;
        row.rt60 = rt60;
        row.snr_db = snr_db;
        row.seed = seed;
        row.signal = signal;
        row.duration_s = duration_s;
        row.sources = {{angle_deg, distance_m, 1.0}};
        const RenderResult r = render_row(row);
        return py::make_tuple(stereo_to_array(r.audio), r.tdoas[0]);
      },
      py::arg("room_id"), py::arg("angle_deg"), py::arg("distance_m"), py::arg("rt60") = 0.0,
      py::arg("snr_db") = std::numeric_limits<double>::infinity(), py::arg("duration_s") = 0.5,
      py::arg("seed") = 0, py::arg("signal") = "speechlike",
      "Render one scene; returns (stereo array at 16 kHz, ground-truth delay in seconds).");
  m.def(
      "ground_truth_tdoa",
      [](int room_id, double angle_deg, double distance_m) {
        return ground_truth_tdoa(room_preset(room_id), SourceSpec{angle_deg, distance_m, 1.0});
      },
      py::arg("room_id"), py::arg("angle_deg"), py::arg("distance_m"));
  m.def(
      "add_noise",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> stereo, double rate,
         double snr_db, std::uint64_t seed) {
        return stereo_to_array(add_noise(stereo_from_array(stereo, rate), snr_db, seed));
      },
      py::arg("stereo"), py::arg("rate"), py::arg("snr_db"), py::arg("seed") = 0);
  m.def(
      "make_mixture",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> dominant,
         py::array_t<double, py::array::c_style | py::array::forcecast> distractor, double rate,
         double intensity) {
        return stereo_to_array(make_mixture(stereo_from_array(dominant, rate),
                                            stereo_from_array(distractor, rate), intensity));
      },
      py::arg("dominant"), py::arg("distractor"), py::arg("rate"), py::arg("intensity"));

  // Losses
  m.def(
      "affinity",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> h1,
         py::array_t<double, py::array::c_style | py::array::forcecast> h2, double c) {
        return matrix_to_array(affinity(matrix_from_array(h1), matrix_from_array(h2), c).values);
      },
      py::arg("h1"), py::arg("h2"), py::arg("temperature") = 0.05);
  m.def(
      "crw_loss",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> h1,
         py::array_t<double, py::array::c_style | py::array::forcecast> h2, double c) {
        const Eigen::MatrixXd m1 = matrix_from_array(h1), m2 = matrix_from_array(h2);
        const LossResult r = crw_loss(affinity(m1, m2, c), affinity(m2, m1, c));
        return py::make_tuple(r.value, matrix_to_array(r.grad_h1), matrix_to_array(r.grad_h2));
      },
      py::arg("h1"), py::arg("h2"), py::arg("temperature") = 0.05,
      "Returns (loss, grad_h1, grad_h2).");
  m.def(
      "zero_loss",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> h1,
         py::array_t<double, py::array::c_style | py::array::forcecast> h2, double c) {
        const LossResult r = zero_loss(affinity(matrix_from_array(h1), matrix_from_array(h2), c));
        return py::make_tuple(r.value, matrix_to_array(r.grad_h1), matrix_to_array(r.grad_h2));
      },
      py::arg("h1"), py::arg("h2"), py::arg("temperature") = 0.05);
  m.def(
      "monoclr_loss",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> h,
         py::array_t<double, py::array::c_style | py::array::forcecast> h_aug, int shift_samples,
         int window_step, double c) {
        EmbeddingSequence a, b;
        a.vectors = matrix_from_array(h);
        b.vectors = matrix_from_array(h_aug);
        a.window_step = b.window_step = window_step;
        const LossResult r = monoclr_loss(a, b, shift_samples, c);
        return py::make_tuple(r.value, matrix_to_array(r.grad_h1), matrix_to_array(r.grad_h2));
      },
      py::arg("h"), py::arg("h_aug"), py::arg("shift_samples") = 0, py::arg("window_step") = 4,
      py::arg("temperature") = 0.05);

  // Estimation helpers
  m.def("delay_to_angle", &delay_to_angle, py::arg("delay_s"), py::arg("mic_distance_m"),
        py::arg("speed_of_sound") = 343.0);
  m.def(
      "iid_direction",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> stereo, double rate) {
        return iid_direction(stereo_from_array(stereo, rate)) == Direction::Right
                   ? std::string("right")
                   : std::string("left");
      },
      py::arg("stereo"), py::arg("rate") = 16000.0);

  // Model
  py::class_<Model>(m, "Model", "Embedding model loaded from a .tdk checkpoint")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("embed", &Model::embed, py::arg("wave"), py::arg("rate") = 16000.0,
           py::arg("window") = 1024, py::arg("step") = 1,
           "Unit-norm sliding-window embeddings, shape (n, d).")
      .def("estimate", &Model::estimate, py::arg("stereo"), py::arg("rate") = 16000.0,
           py::arg("window") = 1024, py::arg("step") = 1, py::arg("agg") = "mode",
           py::arg("vote_mode") = "expectation", py::arg("max_delay_ms") = 0.0,
           py::arg("max_votes") = 0)
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("n_params", &Model::n_params)
      .def_property_readonly("embed_dim", &Model::embed_dim);
  m.def(
      "init_model",
      [](int embed_dim, std::uint64_t seed) {
        ArchConfig arch = ArchConfig::desk();
        arch.embed_dim = embed_dim;
        return Model(init_model(arch, seed));
      },
      py::arg("embed_dim") = 32, py::arg("seed") = 0,
      "Freshly initialized desk-scale model (He init, zero biases).");
}
