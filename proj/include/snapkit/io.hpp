#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "snapkit/dynamics.hpp"
#include "snapkit/wigner.hpp"

namespace snapkit {

using Json = nlohmann::json;

// ---------- CSV ----------

// columns t_ns, I, Q (rad/s); one row per sample, midpoint timestamps
void write_waveform_csv(const std::filesystem::path& path, const PulseWaveform& pulse);

// columns re_alpha, im_alpha, value
void write_wigner_csv(const std::filesystem::path& path, const WignerGrid& grid);

// Inverse of write_wigner_csv; scale/shots/seed metadata live in the JSON
// sidecar and are not recovered here. Malformed rows raise ConfigError with
// the 1-based line number.
WignerGrid read_wigner_csv(const std::filesystem::path& path);

// columns offset, observable, in_span
void write_sweep_csv(const std::filesystem::path& path, const SweepCurve& curve);

// ---------- JSON ----------

Json read_json(const std::filesystem::path& path);  // ConfigError on parse failure
void write_json(const std::filesystem::path& path, const Json& j);

// sidecar for a Wigner CSV: scale B, shots, seed, grid geometry
Json wigner_metadata(const WignerGrid& grid);

// ---------- report schemas ----------

// Directory holding the versioned report schemas (SNAPKIT_SCHEMA_DIR env
// overrides the compiled-in repo path).
std::filesystem::path schema_dir();

// Checks report["schema"] (e.g. "snapkit.prepare.v1") against the shipped
// schema file (schemas/prepare.v1.json); throws ConfigError on violations,
// with the JSON path of the offending node.
void validate_report(const Json& report);

// validate_report + write_json — every emitted report goes through this
void write_report(const std::filesystem::path& path, const Json& report);

}  // namespace snapkit
