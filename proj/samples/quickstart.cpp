// Generates a curved-line page, predicts it with a mildly noisy oracle,
// decodes it and prints the recognized lines next to the ground truth.

#include <cstdio>

#include "folio/folio.hpp"

int main() {
  folio::SynthConfig cfg;
  cfg.n_lines = 3;
  cfg.chars_min = 6;
  cfg.chars_max = 9;
  cfg.n_cls = 20;
  cfg.layout = folio::Layout::sine();
  cfg.seed = 42;
  const folio::SyntheticPage page = folio::gen_page(cfg);

  folio::OracleNoise noise;
  noise.jitter_sigma = 0.05;
  noise.label_swap_p = 0.05;
  noise.seed = 1;
  const folio::PredictionMaps maps = folio::oracle_predict(page, noise);
  const folio::PageResult result = folio::decode(maps);

  std::printf("page %s: %dx%d grid, %zu lines decoded\n", page.page_id.c_str(), page.shape.w_g,
              page.shape.h_g, result.lines.size());
  for (std::size_t q = 0; q < page.annotation.lines.size(); ++q) {
    std::printf("truth %zu:", q);
    for (int c : page.annotation.lines[q]) std::printf(" %d", c);
    std::printf("\n");
  }
  for (std::size_t p = 0; p < result.lines.size(); ++p) {
    std::printf("line  %zu:", p);
    for (int c : result.lines[p].classes()) std::printf(" %d", c);
    std::printf("\n");
  }

  const std::vector<std::vector<folio::ClassSeq>> hyp{result.transcripts()};
  const std::vector<std::vector<folio::ClassSeq>> ref{page.annotation.lines};
  const folio::ArStar s = folio::ar_star(hyp, ref);
  std::printf("AR* = %.4f  CR* = %.4f\n", s.ar_star, s.cr_star);
  return 0;
}
