#pragma once

#include <string>
#include <vector>

#include "babilab/numerics.hpp"

namespace babilab {

// Labelled matrix destined for rendering. Cells below `tau` are blanked in
// rendered output but kept in the data file.
struct Heatmap {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  MatF values;
  float tau = 0.0f;
};

// Plain-text grid format, round-trips through parse_heatmap_text.
std::string heatmap_to_text(const Heatmap& hm);
Heatmap parse_heatmap_text(const std::string& text);

// Grayscale renderings; darker cells carry higher values.
std::string render_svg(const Heatmap& hm, int cell_size = 18);
std::string render_ppm(const Heatmap& hm, int cell_size = 12);

}  // namespace babilab
