// nsca: synth / detect / separate / eval over CSV files.
//
// Exit codes: 0 ok, 2 usage, 3 input, 4 numeric/model, 5 shape.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nsca/nsca.hpp"

namespace fs = std::filesystem;
using namespace nsca;

namespace {

enum Exit : int { kOk = 0, kUsage = 2, kInput = 3, kNumeric = 4, kShape = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::BadSpec:
    case ErrorCode::InvalidWindow:
    case ErrorCode::BadChannel:
    case ErrorCode::BadClass:
    case ErrorCode::BadComponent:
      return kUsage;
    case ErrorCode::BadInput:
    case ErrorCode::DegenerateTruth:
      return kInput;
    case ErrorCode::ShapeMismatch:
      return kShape;
    default:
      return kNumeric;
  }
}

std::string describe(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ClassTooSmall:
      return "class too small for a covariance estimate: " + std::string(e.what());
    case ErrorCode::NotPositiveDefinite:
      return "covariance is not positive definite (try --reg-eps): " + std::string(e.what());
    case ErrorCode::NoConvergence:
      return "iteration did not converge: " + std::string(e.what());
    case ErrorCode::EmptyClass:
      return "partition leaves a class empty: " + std::string(e.what());
    default:
      return e.what();
  }
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::BadInput, "cannot create directory '" + dir + "': " + ec.message());
}

std::vector<std::size_t> parse_lags(const std::string& text) {
  std::vector<std::size_t> lags;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto dash = tok.find('-');
    try {
      if (dash != std::string::npos) {
        const auto lo = std::stoul(tok.substr(0, dash));
        const auto hi = std::stoul(tok.substr(dash + 1));
        if (hi < lo) throw UsageError("bad lag range '" + tok + "'");
        for (auto l = lo; l <= hi; ++l) lags.push_back(l);
      } else {
        lags.push_back(std::stoul(tok));
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad lag list '" + text + "'");
    }
  }
  if (lags.empty()) throw UsageError("empty lag list");
  return lags;
}

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("NSCA_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::logic_error&) {
      throw UsageError(std::string("NSCA_SEED is not an unsigned integer: ") + env);
    }
  }
  return flag_seed;
}

std::string fixed(double v, int prec = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

// ---- synth

struct SynthArgs {
  std::size_t n = 0;
  std::size_t t = 0;
  std::uint64_t seed = 0;
  std::string out = ".";
  double fs = 500.0;
  std::size_t burst_count = 0;
  std::size_t burst_min = 0;
  std::size_t burst_max = 0;
  double burst_amplitude = -1.0;
  bool identity = false;
};

int cmd_synth(const SynthArgs& a) {
  FecgScenario sc = fecg_scenario(a.n);
  if (a.burst_count) sc.burst.count = a.burst_count;
  if (a.burst_min) sc.burst.min_len = a.burst_min;
  if (a.burst_max) sc.burst.max_len = a.burst_max;
  if (a.burst_amplitude >= 0.0) sc.burst.amplitude = a.burst_amplitude;
  sc.options.sample_rate_hz = a.fs;
  sc.options.identity_mixing = a.identity;
  const std::uint64_t seed = effective_seed(a.seed);
  const Mixture m = gen_mixture(a.n, a.t, sc.burst, sc.sources, seed, sc.options);

  ensure_dir(a.out);
  csv::save_record(path_in(a.out, "record.csv"), m.record);
  csv::save_record(path_in(a.out, "sources.csv"), m.truth.sources);
  csv::save_matrix(path_in(a.out, "mixing.csv"), m.truth.mixing);
  csv::save_partition(path_in(a.out, "mask.csv"), m.truth.burst_mask);
  const auto counts = m.truth.burst_mask.class_counts();
  std::cout << "synth n=" << a.n << " T=" << a.t << " seed=" << seed << " burst_source=" << m.truth.burst_source
            << " burst_samples=" << counts[1] << '\n';
  return kOk;
}

// ---- detect

struct DetectArgs {
  std::string record;
  std::string out = ".";
  std::vector<std::string> detectors;
  std::size_t ref = 0;
  double fs = 500.0;
  std::string mask;
  bool plot = false;
  std::size_t plot_points = 2000;
  BankConfig cfg;
};

void write_plot(const std::string& path, std::span<const double> signal, const IndexSeries& norm,
                std::size_t points) {
  const std::size_t t = signal.size();
  const std::size_t step = std::max<std::size_t>(1, (t + points - 1) / std::max<std::size_t>(points, 1));
  double peak = 0.0;
  for (double v : signal) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BadInput, "cannot open '" + path + "' for writing");
  out << "k,signal,index\n";
  for (std::size_t k = 0; k < t; k += step)
    out << k << ',' << csv::format_double(signal[k] * scale) << ',' << csv::format_double(norm.values[k]) << '\n';
}

int cmd_detect(DetectArgs a) {
  const Record rec = csv::load_record(a.record, a.fs);
  if (!a.detectors.empty()) {
    for (const auto& d : a.detectors)
      if (std::find(known_detectors().begin(), known_detectors().end(), d) == known_detectors().end())
        throw UsageError("unknown detector '" + d + "'");
    a.cfg.detectors = a.detectors;
  }
  a.cfg.reference_channel = a.ref;
  std::optional<Partition> truth;
  if (!a.mask.empty()) {
    truth = csv::load_partition(a.mask);
    if (truth->size() != rec.length()) throw Error(ErrorCode::ShapeMismatch, "mask length != record length");
  }
  const auto bank = run_detector_bank(rec, a.cfg);

  std::vector<IndexSeries> normalized;
  for (const auto& idx : bank) normalized.push_back(normalize_index(idx));
  ensure_dir(a.out);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& idx = bank[i];
    csv::save_index(path_in(a.out, idx.name + ".csv"), idx);
    csv::save_index(path_in(a.out, idx.name + "_norm.csv"), normalized[i]);
    if (a.plot) write_plot(path_in(a.out, "plot_" + idx.name + ".csv"), rec.channel(a.ref), normalized[i], a.plot_points);

    const auto valid = idx.valid();
    const auto it = std::max_element(valid.begin(), valid.end());
    std::cout << std::left << std::setw(17) << idx.name << " max=" << csv::format_double(*it)
              << " argmax=" << idx.valid_from + static_cast<std::size_t>(it - valid.begin())
              << " valid_from=" << idx.valid_from;
    if (idx.fallback_count) std::cout << " fallbacks=" << idx.fallback_count;
    if (truth) std::cout << " auc=" << fixed(eval_index_auc(idx, *truth), 4);
    std::cout << '\n';
  }
  return kOk;
}

// ---- separate

struct SeparateArgs {
  std::string record;
  std::string out = ".";
  double fs = 500.0;
  std::string mask;
  std::string index;
  std::string partition;
  double theta = 0.5;
  std::size_t min_event = 1;
  int quantiles = 0;
  std::string method = "auto";
  bool include_total = false;
  std::string lags = "1-10";
  std::size_t target = 0;
  double reg_eps = 0.0;
  bool auto_reg = false;
  std::string weight_rule = "cardinality";
  std::string truth;
};

Partition partition_from(const SeparateArgs& a, std::size_t length) {
  const int given = !a.mask.empty() + !a.index.empty() + !a.partition.empty();
  if (given != 1) throw UsageError("give exactly one of --mask, --index, --partition");
  Partition p;
  if (!a.mask.empty()) {
    p = csv::load_partition(a.mask);
    if (p.classes != 2) throw Error(ErrorCode::BadClass, "--mask must hold labels 0/1");
  } else if (!a.partition.empty()) {
    p = csv::load_partition(a.partition);
  } else {
    IndexSeries idx = csv::load_index(a.index);
    if (idx.size() != length) throw Error(ErrorCode::ShapeMismatch, "index length != record length");
    p = a.quantiles ? quantile_partition(idx, a.quantiles) : threshold_mask(idx, a.theta, a.min_event);
  }
  if (p.size() != length) throw Error(ErrorCode::ShapeMismatch, "partition length != record length");
  return p;
}

int cmd_separate(const SeparateArgs& a) {
  const Record rec = csv::load_record(a.record, a.fs);
  WeightRule rule;
  if (a.weight_rule == "cardinality") rule = WeightRule::Cardinality;
  else if (a.weight_rule == "uniform") rule = WeightRule::Uniform;
  else throw UsageError("--weight-rule must be cardinality or uniform");

  std::optional<Record> truth;
  if (!a.truth.empty()) {
    truth = csv::load_record(a.truth, a.fs);
    if (truth->channels() != rec.channels() || truth->length() != rec.length())
      throw Error(ErrorCode::ShapeMismatch, "truth sources shape differs from the record");
  }

  SeparationResult res;
  std::optional<Partition> part;
  std::string method = a.method;
  if (method == "two-round") {
    const auto lags = parse_lags(a.lags);
    TargetedOptions opts;
    opts.theta_rel = a.theta;
    opts.reg_eps = a.reg_eps;
    res = two_round_targeted(rec, lags, a.target, opts);
    part = res.round1->mask;
  } else if (method == "sobi") {
    const auto lags = parse_lags(a.lags);
    res = second_order_separation(rec, lags);
  } else {
    part = partition_from(a, rec.length());
    if (method == "auto") method = part->classes == 2 ? "two-class" : "multi-class";
    if (method == "two-class") {
      if (part->classes != 2) throw Error(ErrorCode::BadClass, "two-class separation needs a 0/1 mask");
      res = nsca_two_class(rec, *part, a.reg_eps, a.auto_reg);
    } else if (method == "multi-class") {
      res = nsca_multi_class(rec, *part, a.include_total, rule);
    } else {
      throw UsageError("--method must be auto, two-class, multi-class, two-round or sobi");
    }
  }

  ensure_dir(a.out);
  csv::save_matrix(path_in(a.out, "demixer.csv"), res.demixer);
  csv::save_record(path_in(a.out, "sources.csv"), res.sources);
  csv::save_spectra(path_in(a.out, "spectra.csv"), res.spectra);
  if (part) csv::save_partition(path_in(a.out, "partition.csv"), *part);

  std::ostringstream diag;
  const auto& d = res.diagnostics;
  diag << "method " << method << '\n';
  diag << "residual " << csv::format_double(d.residual) << '\n';
  diag << "whitening_error " << csv::format_double(d.whitening_error) << '\n';
  diag << "total_condition " << csv::format_double(d.total_condition) << '\n';
  diag << "reg_eps " << csv::format_double(d.reg_eps) << '\n';
  diag << "sweeps " << d.sweeps << '\n';
  if (!d.eigenvalues.empty()) {
    diag << "eigenvalues";
    for (double v : d.eigenvalues) diag << ' ' << csv::format_double(v);
    diag << '\n';
  }
  if (part) {
    diag << "class_counts";
    for (auto c : part->class_counts()) diag << ' ' << c;
    diag << '\n';
  }
  if (res.spectra.size() >= 2 && res.class_weights.size() == res.spectra.size()) {
    const auto map = eigenratio_map(res.spectra, res.class_weights);
    diag << "class_component";
    for (std::size_t j = 0; j < map.best_component.size(); ++j) diag << ' ' << j << ':' << map.best_component[j];
    diag << "\none_to_one " << (map.one_to_one ? "true" : "false") << '\n';
  }
  if (res.round1) {
    diag << "round1_target " << res.round1->target << '\n';
    diag << "round1_residual " << csv::format_double(res.round1->residual) << '\n';
  }
  if (truth) {
    const EvalReport rep = eval_separation(res.sources, *truth);
    diag << "matched_corr";
    for (double c : rep.matched_corr) diag << ' ' << fixed(c, 6);
    diag << '\n';
    double first = 0.0;
    for (std::size_t j = 0; j < rep.abs_corr.cols(); ++j) first = std::max(first, rep.abs_corr(0, j));
    diag << "first_source_corr " << fixed(first, 6) << '\n';
  }
  {
    std::ofstream f(path_in(a.out, "diagnostics.txt"));
    if (!f) throw Error(ErrorCode::BadInput, "cannot write diagnostics.txt");
    f << diag.str();
  }
  std::cout << diag.str();
  return kOk;
}

// ---- eval

struct EvalArgs {
  std::string est;
  std::string truth;
  std::string est_mask;
  std::string truth_mask;
  std::string index;
  std::string csv_out;
};

int cmd_eval(const EvalArgs& a) {
  const bool have_sources = !a.est.empty() || !a.truth.empty();
  if (have_sources && (a.est.empty() || a.truth.empty())) throw UsageError("--est and --truth go together");
  if ((!a.est_mask.empty() || !a.index.empty()) && a.truth_mask.empty())
    throw UsageError("--est-mask and --index need --truth-mask");
  if (!have_sources && a.truth_mask.empty()) throw UsageError("nothing to evaluate");

  std::ostringstream table, machine;
  machine << "metric,estimate,truth,value\n";
  if (have_sources) {
    const Record est = csv::load_record(a.est);
    const Record truth = csv::load_record(a.truth);
    if (est.channels() != truth.channels() || est.length() != truth.length())
      throw Error(ErrorCode::ShapeMismatch, "estimate and truth shapes differ");
    const EvalReport rep = eval_separation(est, truth);
    table << std::left << std::setw(8) << "truth" << std::setw(10) << "estimate" << "abs_corr\n";
    for (std::size_t j = 0; j < rep.match.size(); ++j) {
      table << std::left << std::setw(8) << j << std::setw(10) << rep.match[j] << fixed(rep.matched_corr[j]) << '\n';
      machine << "matched_corr," << rep.match[j] << ',' << j << ',' << csv::format_double(rep.matched_corr[j]) << '\n';
    }
  }
  if (!a.truth_mask.empty()) {
    const Partition tm = csv::load_partition(a.truth_mask);
    if (!a.est_mask.empty()) {
      const Partition em = csv::load_partition(a.est_mask);
      const MaskScores s = eval_mask(em, tm);
      table << "mask precision " << fixed(s.precision) << " recall " << fixed(s.recall) << " f1 " << fixed(s.f1) << '\n';
      machine << "precision,,," << csv::format_double(s.precision) << '\n';
      machine << "recall,,," << csv::format_double(s.recall) << '\n';
      machine << "f1,,," << csv::format_double(s.f1) << '\n';
    }
    if (!a.index.empty()) {
      const IndexSeries idx = csv::load_index(a.index);
      if (idx.size() != tm.size()) throw Error(ErrorCode::ShapeMismatch, "index length != mask length");
      const double v = eval_index_auc(idx, tm);
      table << "index auc " << fixed(v, 4) << '\n';
      machine << "auc,,," << csv::format_double(v) << '\n';
    }
  }
  std::cout << table.str() << '\n' << machine.str();
  if (!a.csv_out.empty()) {
    std::ofstream f(a.csv_out);
    if (!f) throw Error(ErrorCode::BadInput, "cannot write '" + a.csv_out + "'");
    f << machine.str();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonstationary component analysis toolkit"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fECG-style mixture with ground truth");
  synth->add_option("--n", sa.n, "Channels (= sources)")->required()->check(CLI::Range(2, 64));
  synth->add_option("--t", sa.t, "Samples")->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", sa.seed, "Seed (NSCA_SEED overrides)")->capture_default_str();
  synth->add_option("--out", sa.out, "Output directory")->capture_default_str();
  synth->add_option("--fs", sa.fs, "Sample rate in Hz")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--burst-count", sa.burst_count, "Number of burst windows");
  synth->add_option("--burst-min", sa.burst_min, "Minimum burst length");
  synth->add_option("--burst-max", sa.burst_max, "Maximum burst length");
  synth->add_option("--burst-amplitude", sa.burst_amplitude, "Burst source amplitude")->check(CLI::NonNegativeNumber);
  synth->add_flag("--identity-mixing", sa.identity, "Use A = I");

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Run the detector bank over a record");
  detect->add_option("--record", da.record, "Record CSV")->required();
  detect->add_option("--out", da.out, "Output directory")->capture_default_str();
  detect->add_option("--detectors", da.detectors, "Detector names (default: all)")->delimiter(',');
  detect->add_option("--ref", da.ref, "Reference channel (0-based)")->capture_default_str();
  detect->add_option("--fs", da.fs, "Sample rate in Hz")->capture_default_str();
  detect->add_option("--mask", da.mask, "Truth mask CSV; prints AUC per detector");
  detect->add_option("--ad-window", da.cfg.ad_window)->capture_default_str();
  detect->add_option("--envelope-window", da.cfg.envelope_window)->capture_default_str();
  detect->add_option("--cumulant-window", da.cfg.cumulant_window)->capture_default_str();
  detect->add_option("--cumulant-order", da.cfg.cumulant_order)->capture_default_str();
  detect->add_option("--ar-window", da.cfg.ar_window)->capture_default_str();
  detect->add_option("--ar-order", da.cfg.ar_order)->capture_default_str();
  detect->add_option("--whiteness-window", da.cfg.whiteness_window)->capture_default_str();
  detect->add_option("--easi-step", da.cfg.easi_step)->capture_default_str();
  detect->add_flag("--emit-plot-data", da.plot, "Write downsampled overlay CSVs");
  detect->add_option("--plot-points", da.plot_points, "Rows per overlay CSV")->capture_default_str();

  SeparateArgs pa;
  auto* separate = app.add_subcommand("separate", "Separate a record given a mask, index or partition");
  separate->add_option("--record", pa.record, "Record CSV")->required();
  separate->add_option("--out", pa.out, "Output directory")->capture_default_str();
  separate->add_option("--fs", pa.fs, "Sample rate in Hz")->capture_default_str();
  separate->add_option("--mask", pa.mask, "0/1 mask CSV");
  separate->add_option("--index", pa.index, "Index CSV, thresholded or split by quantiles");
  separate->add_option("--partition", pa.partition, "K-class partition CSV");
  separate->add_option("--theta", pa.theta, "Relative threshold of the index peak")->capture_default_str();
  separate->add_option("--min-event", pa.min_event, "Shortest kept event")->capture_default_str();
  separate->add_option("--quantiles", pa.quantiles, "K for a quantile partition of --index");
  separate->add_option("--method", pa.method, "auto, two-class, multi-class, two-round, sobi")->capture_default_str();
  separate->add_flag("--include-total", pa.include_total, "Multi-class: add C_x to the diagonalized set");
  separate->add_option("--lags", pa.lags, "Lags for two-round/sobi, e.g. 1-10 or 1,2,5")->capture_default_str();
  separate->add_option("--target", pa.target, "Round-one component to refine")->capture_default_str();
  separate->add_option("--reg-eps", pa.reg_eps, "Relative ridge on C_x")->capture_default_str();
  separate->add_flag("--auto-reg", pa.auto_reg, "Retry with a small ridge if C_x is not positive definite");
  separate->add_option("--weight-rule", pa.weight_rule, "cardinality or uniform")->capture_default_str();
  separate->add_option("--truth", pa.truth, "True sources CSV; adds matched correlations to diagnostics");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score estimated sources, masks or an index against ground truth");
  eval->add_option("--est", ea.est, "Estimated sources CSV");
  eval->add_option("--truth", ea.truth, "True sources CSV");
  eval->add_option("--est-mask", ea.est_mask, "Estimated mask CSV");
  eval->add_option("--truth-mask", ea.truth_mask, "True mask CSV");
  eval->add_option("--index", ea.index, "Index CSV scored by AUC against --truth-mask");
  eval->add_option("--csv", ea.csv_out, "Also write the machine-readable report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*detect) return cmd_detect(da);
    if (*separate) return cmd_separate(pa);
    if (*eval) return cmd_eval(ea);
  } catch (const UsageError& e) {
    std::cerr << "nsca: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "nsca: " << describe(e) << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "nsca: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
