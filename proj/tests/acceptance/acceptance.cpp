// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fsg/allocsim.hpp"
#include "fsg/ext4_reader.hpp"
#include "fsg/fsg_io.hpp"
#include "fsg/matcher.hpp"
#include "fsg/metrics.hpp"
#include "oracles/entropy_oracle.hpp"
#include "oracles/generators.hpp"

namespace {

using namespace fsg;

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> body;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Fsg synthetic_genome(const std::vector<std::uint64_t>& sizes, std::uint32_t block_size) {
  Fsg g;
  g.block_size = block_size;
  BlockNo next = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    BlockList b(sizes[i]);
    for (auto& x : b) x = next++;
    g.entries["/f/" + std::to_string(i)] = std::move(b);
  }
  return g;
}

Outcome size_arithmetic() {
  // standard and full columns, block totals spread over many files
  struct Row {
    std::uint64_t blocks;
    double mib;
  };
  std::ostringstream msg;
  for (const auto& [blocks, mib] : {Row{164360, 642.0}, Row{873861, 3413.0}}) {
    std::vector<std::uint64_t> sizes(blocks / 40, 40);
    sizes.push_back(blocks % 40);
    const auto s = metrics::corpus_summary(synthetic_genome(sizes, 4096));
    if (s.total_blocks != blocks) return fail("block total mismatch");
    if (s.required_space != blocks * 4096) return fail("required_space != blocks * 4096");
    if (std::abs(s.required_mib() - mib) > 1.0)
      return fail(std::to_string(blocks) + " blocks -> " + fixed(s.required_mib()) + " MiB");
    msg << blocks << " blocks = " << s.required_space << " B = " << fixed(s.required_mib(), 2)
        << " MiB; ";
  }
  return {true, msg.str()};
}

Outcome histogram_percents() {
  const std::uint64_t counts[] = {24108, 2096, 154, 24, 3, 4, 0};
  const std::uint64_t sizes[] = {1, 10, 100, 500, 1000, 2000, 4000};
  const double want[] = {91.35, 7.94, 0.58, 0.09, 0.01, 0.015, 0.0};
  std::vector<std::uint64_t> plan;
  for (int b = 0; b < 7; ++b) plan.insert(plan.end(), counts[b], sizes[b]);
  const auto rows = metrics::block_count_histogram(synthetic_genome(plan, 4096));
  std::ostringstream msg;
  double worst = 0;
  for (int b = 0; b < 7; ++b) {
    const double d = std::abs(rows[b].percent - want[b]);
    worst = std::max(worst, d);
    msg << rows[b].label() << ":" << fixed(rows[b].percent, 3) << " ";
    if (d > 0.01) return fail("bucket " + rows[b].label() + " off by " + fixed(d));
  }
  msg << "(max |delta| " << fixed(worst, 4) << " pp)";
  return {true, msg.str()};
}

Outcome entropy_oracle() {
  std::mt19937_64 rng(20240601);
  double worst = 0;
  std::size_t files_checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t installs = 1 + rng() % 16;
    const auto names = oracle::file_names(1 + rng() % 32);
    Corpus c;
    for (std::size_t i = 0; i < installs; ++i)
      c.installations.push_back(oracle::random_genome(rng, names, 1, 4, 64));
    const auto u = file_universe(c, UniverseMode::intersection);
    for (bool first : {true, false}) {
      const auto m = metrics::build_occurrence_matrix(c, u, first);
      const auto r = metrics::entropy_per_file(m);
      const auto want = oracle::entropy(c, u.paths, first);
      if (r.per_file.size() != want.size()) return fail("file count differs from oracle");
      const double cap = std::log2(static_cast<double>(installs));
      for (const auto& [path, e] : want) {
        const auto& got = r.per_file.at(path);
        worst = std::max({worst, std::abs(got.shannon_bits - e.shannon),
                          std::abs(got.min_entropy_bits - e.min_entropy)});
        if (first && !(got.min_entropy_bits <= got.shannon_bits + 1e-12 &&
                       got.shannon_bits <= cap + 1e-12 && got.min_entropy_bits >= 0))
          return fail("ordering violated for " + path + " in trial " + std::to_string(trial));
        ++files_checked;
      }
    }
  }
  if (worst > 1e-12) return fail("max |delta| = " + sci(worst));
  return {true, std::to_string(files_checked) + " file estimates, max |delta| = " + sci(worst)};
}

Outcome fixtures() {
  std::ostringstream msg;
  for (const auto& [name, bs] : {std::pair<std::string, std::uint32_t>{"ext4_small", 4096},
                                 std::pair<std::string, std::uint32_t>{"ext4_frag", 1024}}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto img = ext4::open_image(std::string(FSG_FIXTURE_DIR) + "/" + name + ".img");
    const auto got = ext4::extract_fsg(img, false, name);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ifstream tsv(std::string(FSG_FIXTURE_DIR) + "/" + name + ".truth.tsv");
    const auto truth = ingest_debugfs_dump(tsv, name, bs);
    if (img.byte_size() > 64u << 20) return fail(name + " larger than 64 MiB");
    if (got.entries.size() < 100) return fail(name + " has fewer than 100 files");
    if (got.entries != truth.entries) return fail(name + " differs from ground truth");
    if (secs >= 2.0) return fail(name + " took " + fixed(secs) + " s");
    std::size_t blocks = 0;
    for (const auto& [_, b] : got.entries) blocks += b.size();
    msg << name << ": " << got.entries.size() << " files, " << blocks << " blocks, "
        << fixed(secs, 3) << " s; ";
  }
  return {true, msg.str()};
}

Outcome fig2_trend() {
  const auto cfg = sim::default_config();
  const auto corpus = sim::simulate_corpus(cfg, 200, 2);
  const auto m = metrics::build_occurrence_matrix(
      corpus, file_universe(corpus, UniverseMode::intersection), true);
  std::vector<double> index, ks;
  for (std::size_t i = 0; i < cfg.file_plan.size(); ++i) {
    const auto cdf = metrics::location_cdf(m, cfg.file_plan[i].path);
    if (cdf.empty()) continue;
    index.push_back(static_cast<double>(i));
    ks.push_back(metrics::ks_distance_to_uniform(cdf, {0, cfg.disk_blocks}));
  }
  const double rho = oracle::spearman(index, ks);
  const std::string d = "Spearman(write index, KS) = " + fixed(rho) + " over " +
                        std::to_string(index.size()) + " files";
  if (!(rho <= -0.3)) return fail(d);
  return {true, d};
}

Outcome uniqueness() {
  const auto cfg = sim::default_config();
  const auto corpus = sim::simulate_corpus(cfg, 100, 6);
  const auto u = file_universe(corpus, UniverseMode::intersection);
  std::uint64_t min_d = UINT64_MAX;
  const auto& all = corpus.installations;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      min_d = std::min(min_d, metrics::hamming_distance(all[i], all[j], u));
  if (min_d == 0) return fail("two installations share a genome");

  const auto r = metrics::min_entropy_per_file(metrics::build_occurrence_matrix(corpus, u, true));
  const std::size_t skip = cfg.file_plan.size() / 20;
  std::size_t considered = 0, positive = 0;
  for (std::size_t i = skip; i < cfg.file_plan.size(); ++i) {
    auto it = r.per_file.find(cfg.file_plan[i].path);
    if (it == r.per_file.end()) continue;
    ++considered;
    positive += it->second.min_entropy_bits > 0;
  }
  const double frac = static_cast<double>(positive) / static_cast<double>(considered);
  const std::string d = "min pairwise Hamming " + std::to_string(min_d) + "; " +
                        std::to_string(positive) + "/" + std::to_string(considered) +
                        " late files with min-entropy > 0 (" + fixed(100 * frac, 1) + "%)";
  if (frac < 0.9) return fail(d);
  return {true, d};
}

Outcome matching() {
  const auto cfg = sim::default_config();
  const auto enrolled = sim::simulate_corpus(cfg, 50, 1000);
  const auto impostors = sim::simulate_corpus(cfg, 50, 2000);
  const auto universe = file_universe(enrolled, UniverseMode::intersection);
  const auto set = matcher::enroll(enrolled.installations, universe, matcher::kDefaultThreshold);

  for (const auto& d : enrolled.installations) {
    const auto id = matcher::identify(d, set, 0.9);
    if (!id.matched || id.label != d.device_label || id.score.similarity != 1.0)
      return fail("false reject of " + d.device_label);
  }
  double worst_impostor = 0;
  for (const auto& d : impostors.installations) {
    const auto id = matcher::identify(d, set, 0.9);
    worst_impostor = std::max(worst_impostor, id.score.similarity);
    if (id.matched) return fail("false accept of fresh-seed " + d.device_label);
  }

  // Ownership: the reference device keeps its read-only files but gains and
  // rewrites others after enrollment.
  const Fsg& reference = enrolled.installations[7];
  std::vector<std::string> readonly;
  for (std::size_t i = 0; i < cfg.file_plan.size(); i += 2) readonly.push_back(cfg.file_plan[i].path);
  const auto ro = make_universe(readonly);
  Fsg modified = reference;
  for (std::size_t i = 1; i < cfg.file_plan.size(); i += 2)
    modified.entries[cfg.file_plan[i].path] = {cfg.disk_blocks - 1 - i};
  for (int k = 0; k < 100; ++k)
    modified.entries["/home/user/new" + std::to_string(k)] = {static_cast<BlockNo>(k)};
  const auto accept = matcher::verify_ownership(modified, reference, ro, 0.9);
  if (!accept.accepted) return fail("modified reference rejected");

  const Fsg forged = sim::simulate_installation(cfg, 0xF0F0);  // same plan, other layout
  const auto reject = matcher::verify_ownership(forged, reference, ro, 0.9);
  if (reject.accepted || reject.score.similarity >= 0.5)
    return fail("forgery scored " + fixed(reject.score.similarity));

  return {true, "FRR 0/50, FAR 0/50 (best impostor " + fixed(worst_impostor) +
                    "), owner " + fixed(accept.score.similarity) + ", forgery " +
                    fixed(reject.score.similarity)};
}

Outcome metric_laws() {
  std::mt19937_64 rng(88);
  const auto names = oracle::file_names(24);
  const auto u = make_universe(names);
  for (int t = 0; t < 200; ++t) {
    // small location range so that coincidences actually happen
    const auto a = oracle::random_genome(rng, names, 0, 5, 10, "a");
    const auto b = oracle::random_genome(rng, names, 0, 5, 10, "b");
    const auto c = oracle::random_genome(rng, names, 0, 5, 10, "c");
    const auto ab = metrics::hamming_distance(a, b, u), ba = metrics::hamming_distance(b, a, u);
    const auto bc = metrics::hamming_distance(b, c, u), ac = metrics::hamming_distance(a, c, u);
    if (metrics::hamming_distance(a, a, u) != 0) return fail("d(a,a) != 0");
    if ((ab == 0) != (a.entries == b.entries)) return fail("identity of indiscernibles");
    if (ab != ba) return fail("symmetry");
    if (ac > ab + bc) return fail("triangle inequality");
    if (matcher::similarity(a, a, u).similarity != 1.0) return fail("similarity(a,a) != 1");
    for (const auto* g : {&a, &b, &c}) {
      std::stringstream io;
      write_fsg(*g, io);
      if (read_fsg(io) != *g) return fail("serialization round trip");
    }
  }
  return {true, "200 triples: identity, symmetry, triangle, self-similarity, round trip"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Size summary arithmetic", 1.0, size_arithmetic},
      {2, "Block-count histogram percentages", 1.0, histogram_percents},
      {3, "Entropy oracle equivalence", 5.0, entropy_oracle},
      {4, "ext4 fixture fidelity", 4.0, fixtures},
      {5, "First-block trend along the installation", 60.0, fig2_trend},
      {6, "Genome uniqueness", 30.0, uniqueness},
      {7, "Matching separation", 30.0, matching},
      {8, "Metric laws", 10.0, metric_laws},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && secs >= c.budget_s) o = fail("over time budget: " + o.detail);
    failures += !o.ok;
    std::printf("[%s] criterion %d: %s (%.3f s / %.0f s) - %s\n", o.ok ? "PASS" : "FAIL", c.id,
                c.name.c_str(), secs, c.budget_s, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
