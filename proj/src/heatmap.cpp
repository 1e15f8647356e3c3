#include "babilab/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "babilab/corpus.hpp"

namespace babilab {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string heatmap_to_text(const Heatmap& hm) {
  if (hm.values.rows() != Eigen::Index(hm.row_labels.size()) ||
      hm.values.cols() != Eigen::Index(hm.col_labels.size()))
    throw DataError("heatmap labels do not match its dimensions");
  std::ostringstream out;
  out << "heatmap " << hm.row_labels.size() << " " << hm.col_labels.size() << " "
      << hm.tau << "\n";
  for (size_t i = 0; i < hm.row_labels.size(); ++i)
    out << (i ? "\t" : "") << hm.row_labels[i];
  out << "\n";
  for (size_t i = 0; i < hm.col_labels.size(); ++i)
    out << (i ? "\t" : "") << hm.col_labels[i];
  out << "\n";
  out << std::setprecision(8);
  for (Eigen::Index r = 0; r < hm.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < hm.values.cols(); ++c)
      out << (c ? "\t" : "") << hm.values(r, c);
    out << "\n";
  }
  return out.str();
}

Heatmap parse_heatmap_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty heatmap file", line_no);
  std::istringstream header(line);
  std::string tag;
  size_t rows = 0, cols = 0;
  float tau = 0.0f;
  if (!(header >> tag >> rows >> cols >> tau) || tag != "heatmap")
    throw ParseError("bad heatmap header", line_no);
  Heatmap hm;
  hm.tau = tau;
  ++line_no;
  if (!std::getline(in, line)) throw ParseError("missing row labels", line_no);
  hm.row_labels = split_tabs(line);
  ++line_no;
  if (!std::getline(in, line)) throw ParseError("missing column labels", line_no);
  hm.col_labels = split_tabs(line);
  if (hm.row_labels.size() != rows || hm.col_labels.size() != cols)
    throw ParseError("label count does not match header", line_no);
  hm.values.resize(Eigen::Index(rows), Eigen::Index(cols));
  for (size_t r = 0; r < rows; ++r) {
    ++line_no;
    if (!std::getline(in, line)) throw ParseError("missing value row", line_no);
    const auto cells = split_tabs(line);
    if (cells.size() != cols) throw ParseError("wrong cell count", line_no);
    for (size_t c = 0; c < cols; ++c) {
      try {
        hm.values(Eigen::Index(r), Eigen::Index(c)) = std::stof(cells[c]);
      } catch (const std::exception&) {
        throw ParseError("bad cell value '" + cells[c] + "'", line_no);
      }
    }
  }
  return hm;
}

std::string render_svg(const Heatmap& hm, int cell_size) {
  const int rows = int(hm.values.rows()), cols = int(hm.values.cols());
  size_t max_row_label = 0, max_col_label = 0;
  for (const auto& l : hm.row_labels) max_row_label = std::max(max_row_label, l.size());
  for (const auto& l : hm.col_labels) max_col_label = std::max(max_col_label, l.size());
  const int left = int(max_row_label) * 7 + 10;
  const int top = int(max_col_label) * 6 + 10;
  const int width = left + cols * cell_size + 10;
  const int height = top + rows * cell_size + 10;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const float v = hm.values(r, c);
      const int x = left + c * cell_size, y = top + r * cell_size;
      if (v >= hm.tau) {
        const int g = int(std::lround(255.0f * (1.0f - std::clamp(v, 0.0f, 1.0f))));
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_size
            << "\" height=\"" << cell_size << "\" fill=\"rgb(" << g << "," << g << ","
            << g << ")\"/>\n";
      }
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_size
          << "\" height=\"" << cell_size
          << "\" fill=\"none\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n";
    }
  svg << "<g font-family=\"monospace\" font-size=\"11\">\n";
  for (int r = 0; r < rows; ++r)
    svg << "<text x=\"" << left - 5 << "\" y=\"" << top + r * cell_size + cell_size / 2 + 4
        << "\" text-anchor=\"end\">" << xml_escape(hm.row_labels[size_t(r)])
        << "</text>\n";
  for (int c = 0; c < cols; ++c) {
    const int x = left + c * cell_size + cell_size / 2;
    svg << "<text x=\"" << x << "\" y=\"" << top - 5 << "\" text-anchor=\"start\" "
        << "transform=\"rotate(-60 " << x << " " << top - 5 << ")\">"
        << xml_escape(hm.col_labels[size_t(c)]) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

std::string render_ppm(const Heatmap& hm, int cell_size) {
  const int rows = int(hm.values.rows()), cols = int(hm.values.cols());
  const int width = cols * cell_size, height = rows * cell_size;
  std::ostringstream out;
  out << "P5\n" << width << " " << height << "\n255\n";
  std::string pixels(size_t(width) * size_t(height), '\xff');
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const float v = hm.values(r, c);
      if (v < hm.tau) continue;
      const char g =
          char(int(std::lround(255.0f * (1.0f - std::clamp(v, 0.0f, 1.0f)))));
      for (int y = r * cell_size; y < (r + 1) * cell_size; ++y)
        for (int x = c * cell_size; x < (c + 1) * cell_size; ++x)
          pixels[size_t(y) * size_t(width) + size_t(x)] = g;
    }
  out << pixels;
  return out.str();
}

}  // namespace babilab
