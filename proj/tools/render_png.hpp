#pragma once

#include <filesystem>

namespace snapkit {

// Reads a square Wigner CSV grid and writes an RGB heatmap PNG (diverging
// blue/white/red, symmetric range, nearest-neighbor upsampled).
void render_wigner_png(const std::filesystem::path& csv, const std::filesystem::path& png);

}  // namespace snapkit
