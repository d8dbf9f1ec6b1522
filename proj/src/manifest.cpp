#include "tdekit/manifest.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace tde {

namespace {

constexpr const char* kHeader = "# tdekit-manifest-v1";

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  require(out.good(), "write_manifest: cannot open '" + path + "'");
  out << kHeader << "\n";
  for (const auto& r : rows) {
    out << "id=" << r.id << " room=" << r.room_id << " rt60=" << fmt_double(r.rt60)
        << " snr_db=" << fmt_double(r.snr_db) << " seed=" << r.seed << " sig=" << r.signal
        << " dur=" << fmt_double(r.duration_s) << " rate=" << fmt_double(r.rate) << " srcs=";
    for (std::size_t i = 0; i < r.sources.size(); ++i) {
      if (i) out << ";";
      out << fmt_double(r.sources[i].angle_deg) << ":" << fmt_double(r.sources[i].distance_m)
          << ":" << fmt_double(r.sources[i].gain);
    }
    out << " tau_ms=";
    for (std::size_t i = 0; i < r.tau_ms.size(); ++i) {
      if (i) out << ";";
      out << fmt_double(r.tau_ms[i]);
    }
    out << " wav=" << r.wav << "\n";
  }
  require(out.good(), "write_manifest: write failed for '" + path + "'");
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_manifest: cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  require(line == kHeader, "read_manifest: '" + path + "' is not a tdekit manifest");

  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ManifestRow r;
    std::istringstream ls(line);
    std::string field;
    while (ls >> field) {
      const auto eq = field.find('=');
      require(eq != std::string::npos, "read_manifest: malformed field '" + field + "'");
      const std::string key = field.substr(0, eq);
      const std::string val = field.substr(eq + 1);
      if (key == "id") r.id = std::stoi(val);
      else if (key == "room") r.room_id = std::stoi(val);
      else if (key == "rt60") r.rt60 = parse_double(val);
      else if (key == "snr_db") r.snr_db = parse_double(val);
      else if (key == "seed") r.seed = std::stoull(val);
      else if (key == "sig") r.signal = val;
      else if (key == "dur") r.duration_s = parse_double(val);
      else if (key == "rate") r.rate = parse_double(val);
      else if (key == "srcs") {
        for (const auto& part : split(val, ';')) {
          if (part.empty()) continue;
          const auto f = split(part, ':');
          require(f.size() == 3, "read_manifest: malformed source spec '" + part + "'");
          r.sources.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2])});
        }
      } else if (key == "tau_ms") {
        for (const auto& part : split(val, ';'))
          if (!part.empty()) r.tau_ms.push_back(parse_double(part));
      } else if (key == "wav") {
        r.wav = val;
      }
      // Unknown keys are ignored for forward compatibility.
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

Scene scene_from_row(const ManifestRow& row) {
  Scene scene;
  scene.room = room_preset(row.room_id);
  scene.room.rt60 = row.rt60;
  scene.sources = row.sources;
  scene.snr_db = row.snr_db;
  scene.seed = row.seed;
  return scene;
}

std::vector<MonoClip> signals_from_row(const ManifestRow& row) {
  const std::size_t n = static_cast<std::size_t>(std::llround(row.duration_s * row.rate));
  std::vector<MonoClip> signals;
  for (std::size_t i = 0; i < row.sources.size(); ++i) {
    const std::uint64_t s = hash_combine(row.seed, 0x736967 + i);
    if (row.signal == "white")
      signals.push_back(white_noise(n, row.rate, s));
    else if (row.signal == "speechlike")
      signals.push_back(speechlike_source(n, row.rate, s));
    else
      fail("signals_from_row: unknown signal kind '" + row.signal + "'");
  }
  return signals;
}

RenderResult render_row(const ManifestRow& row) {
  return render_scene(scene_from_row(row), signals_from_row(row));
}

StereoClip row_audio(const ManifestRow& row, const std::string& manifest_dir) {
  if (!row.wav.empty()) {
    const auto p = std::filesystem::path(manifest_dir) / row.wav;
    return load_wav_stereo(p.string());
  }
  return render_row(row).audio;
}

}  // namespace tde
