#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "revsum/attention.hpp"

namespace revsum {

inline constexpr double kHeatmapScale = 100.0;
inline constexpr double kHighlightThreshold = 50.0;

// Min-max maps weights onto [0, 100]. A single weight maps to 100; any
// other constant vector maps to all zeros.
std::vector<double> rescale_weights(std::span<const double> weights);

// Indices whose rescaled weight is at least the threshold.
std::vector<std::size_t> highlighted_tokens(std::span<const double> rescaled);

// Sidecar path for a heatmap document: same stem, ".json" extension.
std::filesystem::path heatmap_sidecar_path(const std::filesystem::path& html);

/// Writes a standalone HTML document with one line per attention row (per
/// layer, head and hop), colouring tokens at or above the threshold with
/// intensity proportional to the rescaled weight, plus a JSON sidecar with
/// raw and rescaled weights. Every record must range over `tokens`.
void export_heatmap(const AttentionTrace& trace,
                    std::span<const std::string> tokens,
                    const std::filesystem::path& html_path);

}  // namespace revsum
