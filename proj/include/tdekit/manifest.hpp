#pragma once

#include <string>
#include <vector>

#include "tdekit/sim.hpp"

namespace tde {

/// One labeled scene in a dataset manifest. Rendering a row is fully
/// deterministic, so manifests double as corpora: the audio can be rebuilt
/// from the row alone when no WAV was written.
struct ManifestRow {
  int id = 0;
  int room_id = 1;
  double rt60 = 0.0;
  double snr_db = 30.0;
  std::uint64_t seed = 0;
  std::vector<SourceSpec> sources;
  std::vector<double> tau_ms;      // ground truth per source, dominant first
  std::string signal = "speechlike";  // speechlike | white
  double duration_s = 0.5;
  double rate = 16000.0;
  std::string wav;  // path relative to the manifest, empty if not written
};

/// Plain-text manifest, one scene per line of space-separated key=value
/// fields; floating-point values round-trip exactly.
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

Scene scene_from_row(const ManifestRow& row);
std::vector<MonoClip> signals_from_row(const ManifestRow& row);

/// Renders the row's scene from scratch (ignores any written WAV).
RenderResult render_row(const ManifestRow& row);

/// Loads the row's audio: reads the WAV next to the manifest when present,
/// renders otherwise.
StereoClip row_audio(const ManifestRow& row, const std::string& manifest_dir);

}  // namespace tde
