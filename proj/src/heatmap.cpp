#include "revsum/heatmap.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "revsum/errors.hpp"

namespace revsum {

namespace {

std::string escape_html(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string row_label(const AttentionRecord& r, std::size_t row) {
  std::ostringstream label;
  label << r.kind << " layer " << r.layer << " head " << r.head;
  if (r.rows > 1) label << " row " << row;
  return label.str();
}

}  // namespace

std::vector<double> rescale_weights(std::span<const double> weights) {
  std::vector<double> out(weights.size(), 0.0);
  if (weights.empty()) return out;
  if (weights.size() == 1) {
    out[0] = kHeatmapScale;
    return out;
  }
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = kHeatmapScale * (weights[i] - *lo) / range;
  }
  return out;
}

std::vector<std::size_t> highlighted_tokens(std::span<const double> rescaled) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rescaled.size(); ++i) {
    if (rescaled[i] >= kHighlightThreshold) out.push_back(i);
  }
  return out;
}

std::filesystem::path heatmap_sidecar_path(const std::filesystem::path& html) {
  auto sidecar = html;
  sidecar.replace_extension(".json");
  if (sidecar == html) sidecar += ".weights.json";
  return sidecar;
}

void export_heatmap(const AttentionTrace& trace,
                    std::span<const std::string> tokens,
                    const std::filesystem::path& html_path) {
  for (const auto& r : trace.records) {
    if (r.cols != tokens.size() || r.weights.size() != r.rows * r.cols) {
      throw DataError("heatmap: " + r.kind + " layer " + std::to_string(r.layer) +
                      " has " + std::to_string(r.cols) + " weights per row but " +
                      std::to_string(tokens.size()) + " tokens");
    }
  }

  nlohmann::json sidecar;
  sidecar["tokens"] = std::vector<std::string>(tokens.begin(), tokens.end());
  sidecar["scale"] = kHeatmapScale;
  sidecar["threshold"] = kHighlightThreshold;
  sidecar["rows"] = nlohmann::json::array();

  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
       << "<title>Attention heatmap</title>\n<style>\n"
       << "body { font-family: sans-serif; margin: 2em; }\n"
       << ".row { margin-bottom: 1.2em; line-height: 1.9; }\n"
       << ".label { font-size: 0.8em; color: #555; }\n"
       << ".tok { padding: 0.1em 0.2em; border-radius: 3px; }\n"
       << "</style>\n</head>\n<body>\n";
  for (const auto& r : trace.records) {
    for (std::size_t row = 0; row < r.rows; ++row) {
      const auto raw = r.row(row);
      const auto scaled = rescale_weights(raw);
      const auto marked = highlighted_tokens(scaled);
      html << "<div class=\"row\">\n<div class=\"label\">"
           << escape_html(row_label(r, row)) << "</div>\n";
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        html << "<span class=\"tok\"";
        if (scaled[t] >= kHighlightThreshold) {
          html << " style=\"background-color: rgba(214, 39, 40, "
               << scaled[t] / kHeatmapScale << ")\"";
        }
        html << " title=\"" << scaled[t] << "\">" << escape_html(tokens[t])
             << "</span>\n";
      }
      html << "</div>\n";
      sidecar["rows"].push_back({{"kind", r.kind},
                                 {"source", r.source},
                                 {"layer", r.layer},
                                 {"head", r.head},
                                 {"row", row},
                                 {"raw", std::vector<double>(raw.begin(), raw.end())},
                                 {"rescaled", scaled},
                                 {"highlighted", marked}});
    }
  }
  html << "</body>\n</html>\n";

  std::ofstream out(html_path);
  if (!out) throw DataError("cannot write " + html_path.string());
  out << html.str();
  const auto sidecar_path = heatmap_sidecar_path(html_path);
  std::ofstream side(sidecar_path);
  if (!side) throw DataError("cannot write " + sidecar_path.string());
  side << sidecar.dump(2) << '\n';
}

}  // namespace revsum
