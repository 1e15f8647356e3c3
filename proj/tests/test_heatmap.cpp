#include <doctest.h>

#include <sstream>

#include "babilab/corpus.hpp"
#include "babilab/heatmap.hpp"

using namespace babilab;

namespace {

Heatmap sample() {
  Heatmap hm;
  hm.row_labels = {"api_call", "cuisine"};
  hm.col_labels = {"<u>", "CUISINE", "hello"};
  hm.values = MatF(2, 3);
  hm.values << 0.05f, 0.80f, 0.15f, 0.30f, 0.10f, 0.60f;
  hm.tau = 0.2f;
  return hm;
}

}  // namespace

TEST_CASE("heatmap text form round-trips") {
  const Heatmap hm = sample();
  const std::string text = heatmap_to_text(hm);
  const Heatmap parsed = parse_heatmap_text(text);
  CHECK(parsed.row_labels == hm.row_labels);
  CHECK(parsed.col_labels == hm.col_labels);
  CHECK(parsed.tau == hm.tau);
  REQUIRE(parsed.values.rows() == 2);
  REQUIRE(parsed.values.cols() == 3);
  CHECK((parsed.values - hm.values).cwiseAbs().maxCoeff() < 1e-5f);
  CHECK(heatmap_to_text(parsed) == text);
  CHECK_THROWS_AS(parse_heatmap_text("not a heatmap\n"), ParseError);
}

TEST_CASE("svg rendering blanks sub-threshold cells") {
  const std::string svg = render_svg(sample());
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("api_call") != std::string::npos);
  CHECK(svg.find("CUISINE") != std::string::npos);
  // 3 of the 6 cells clear tau = 0.2 and get a filled rect
  size_t filled = 0;
  for (size_t pos = svg.find("fill=\"rgb("); pos != std::string::npos;
       pos = svg.find("fill=\"rgb(", pos + 1))
    ++filled;
  CHECK(filled == 3);
}

TEST_CASE("ppm rendering has a valid header and payload size") {
  const Heatmap hm = sample();
  const std::string ppm = render_ppm(hm, 4);
  REQUIRE(ppm.rfind("P5\n", 0) == 0);
  std::istringstream header(ppm);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  header >> magic >> w >> h >> maxval;
  CHECK(w == 3 * 4);
  CHECK(h == 2 * 4);
  CHECK(maxval == 255);
  const size_t payload = ppm.size() - size_t(header.tellg()) - 1;
  CHECK(payload == size_t(w) * size_t(h));
}
