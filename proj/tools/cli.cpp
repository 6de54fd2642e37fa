#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "skpd/dataset.hpp"
#include "skpd/error.hpp"
#include "skpd/io.hpp"
#include "skpd/metrics.hpp"
#include "skpd/nonlinear.hpp"
#include "skpd/simgen.hpp"
#include "skpd/skpd_linear.hpp"
#include "skpd/solvers.hpp"
#include "skpd/study.hpp"
#include "skpd/tuning.hpp"

namespace skpd::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kManifest = "manifest.txt";

struct GenArgs {
  std::string signal = "one-circle";
  std::string dims = "128x128";
  std::string block;
  std::string out;
  std::string nonlinear;
  std::size_t n = 1000;
  double sigma = 1.0;
  std::uint64_t seed = 7;
  int rank = 0;
  bool retain_raw = false;
  bool pad = false;
};

struct FitArgs {
  std::string x;
  std::string y;
  std::string block = "8x8";
  std::string rank = "1";
  std::string lambda_grid;
  std::string rank_grid;
  std::string method = "linear";
  std::string activation = "relu";
  bool intercept = false;
  std::string residualize;
  std::string out;
  std::optional<double> kappa;
  std::optional<double> lambda_tgt;
  std::optional<double> lambda0;
  std::optional<double> hard_threshold;
  int epochs = 200;
  double step = 1.0;
  std::size_t batch = 0;
  std::uint64_t seed = 1;
  bool pad = false;
};

struct EvalArgs {
  std::string model;
  std::string truth;
  std::string test;
  std::string data;
  std::string out;
  std::size_t perm = 0;
  std::uint64_t perm_seed = 1;
};

struct BenchArgs {
  std::string study = "circle";
  std::string out;
  std::string reps_out;
  std::string methods;
  std::string dims;
  std::string block;
  int reps = 100;
  std::uint64_t seed = 1;
  std::optional<std::size_t> n;
  std::optional<double> sigma;
  unsigned threads = 1;
  bool quiet = false;
};

struct MaskArgs {
  std::string out;
  std::string dims = "128x128";
};

struct ExportArgs {
  std::string in;
  std::string out;
  std::string format = "pgm";
};

Dims default_block(std::size_t rank) { return Dims(rank, 8); }

std::string dims_text(const Dims& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "x" : "") + std::to_string(d[i]);
  return s;
}

NdArray image_at(const NdArray& stack, std::size_t i) {
  const Dims dims(stack.dims().begin() + 1, stack.dims().end());
  const std::size_t sz = dims_product(dims);
  const auto& v = stack.values();
  return NdArray(dims, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(i * sz),
                                           v.begin() + static_cast<std::ptrdiff_t>((i + 1) * sz)));
}

NdArray stack_images(const std::vector<NdArray>& images) {
  Dims dims{images.size()};
  dims.insert(dims.end(), images.front().dims().begin(), images.front().dims().end());
  std::vector<double> values;
  values.reserve(dims_product(dims));
  for (const auto& im : images) values.insert(values.end(), im.values().begin(), im.values().end());
  return NdArray(dims, std::move(values));
}

NdArray pad_stack(const NdArray& stack, const Dims& block) {
  std::vector<NdArray> out;
  out.reserve(stack.dims()[0]);
  for (std::size_t i = 0; i < stack.dims()[0]; ++i) out.push_back(pad_to_blocks(image_at(stack, i), block));
  return stack_images(out);
}

Vector to_vector(const NdArray& a) {
  if (a.rank() != 1) throw ShapeError("expected a 1-D array, got " + dims_to_string(a.dims()));
  return vec_row_major(a);
}

NdArray vector_array(const Vector& v) { return unvec(v, Dims{static_cast<std::size_t>(v.size())}); }

Dataset load_dataset(const std::string& x_path, const std::string& y_path, const Dims& block, bool pad) {
  NdArray images = read_skt(x_path);
  const Vector y = to_vector(read_skt(y_path));
  if (images.rank() < 3 || images.rank() > 4) {
    throw ShapeError(x_path + ": expected stacked images (n, D1, D2[, D3]), got " +
                     dims_to_string(images.dims()));
  }
  if (images.dims()[0] != static_cast<std::size_t>(y.size())) {
    throw ShapeError(x_path + " holds " + std::to_string(images.dims()[0]) + " images but " + y_path +
                     " has " + std::to_string(y.size()) + " responses");
  }
  if (pad) images = pad_stack(images, block);
  return make_dataset(images, y, block);
}

void write_trace(const std::string& path, const PathTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "t,lambda,lambda_norm,b_norm,nnz_a,rank,rss_mean,rel_change,lasso_iterations,lasso_converged,"
         "ridge_fallback\n";
  for (const auto& r : trace.records) {
    out << r.t << ',' << format_double(r.lambda) << ',' << format_double(r.lambda_norm) << ','
        << format_double(r.b_norm) << ',' << r.nnz_a << ',' << r.rank << ',' << format_double(r.rss_mean)
        << ',' << format_double(r.rel_change) << ',' << r.lasso_iterations << ','
        << (r.lasso_converged ? 1 : 0) << ',' << (r.ridge_fallback ? 1 : 0) << '\n';
  }
}

void write_loss_trace(const std::string& path, const std::vector<double>& loss) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < loss.size(); ++i) out << i + 1 << ',' << format_double(loss[i]) << '\n';
}

void write_coefficients(const fs::path& dir, const NdArray& c) {
  write_skt((dir / "C_hat.skt").string(), c);
  export_heatmap(c, (dir / "C_hat.pgm").string(), "pgm");
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const Dims dims = parse_dims(a.dims);
  const Dims block = a.block.empty() ? default_block(dims.size()) : parse_dims(a.block);
  if (block.size() != dims.size()) throw InvalidArgument("--block and --dims differ in rank");
  const SignalSpec spec = parse_signal(a.signal, dims);

  GeneratedStudy g;
  NdArray images;
  if (!a.nonlinear.empty()) {
    const Activation act = parse_activation(a.nonlinear);
    PlantedSignal terms = planted_terms(spec);
    if (a.rank > 0) {
      if (static_cast<std::size_t>(a.rank) > terms.grids.size()) {
        throw InvalidArgument("--rank " + std::to_string(a.rank) + " exceeds the " +
                              std::to_string(terms.grids.size()) + " planted terms of " + a.signal);
      }
      terms.grids.resize(static_cast<std::size_t>(a.rank));
      terms.blocks.resize(static_cast<std::size_t>(a.rank));
    }
    if (a.pad) throw InvalidArgument("--pad is not supported with --nonlinear");
    g = gen_nonlinear_response(terms, act, block, a.n, a.sigma, a.seed, true);
    images = std::move(*g.data.raw);
  } else {
    if (a.rank > 0) throw InvalidArgument("--rank requires --nonlinear");
    NdArray c = make_signal(spec);
    if (a.pad) {
      const NdArray padded = pad_to_blocks(c, block);
      g = gen_dataset(padded, block, a.n, a.sigma, a.seed, true);
      // Padding pixels carry no signal; zero them so the stored images are true zero-padding.
      const NdArray keep = pad_to_blocks(NdArray(c.dims(), 1.0), block);
      images = std::move(*g.data.raw);
      const std::size_t sz = keep.size();
      for (std::size_t i = 0; i < images.size(); ++i) images[i] *= keep[i % sz];
    } else {
      g = gen_dataset(c, block, a.n, a.sigma, a.seed, true);
      images = std::move(*g.data.raw);
    }
  }

  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_skt((dir / "X.skt").string(), images);
  write_skt((dir / "y.skt").string(), vector_array(g.data.y));
  write_skt((dir / "C_true.skt").string(), g.c_true);

  Manifest m;
  m.set("kind", "dataset");
  m.set("signal", a.signal);
  m.set("image_dims", dims_text(g.c_true.dims()));
  m.set("block_dims", dims_text(block));
  m.set("n", std::to_string(a.n));
  m.set("sigma", format_double(a.sigma));
  m.set("seed", std::to_string(a.seed));
  m.set("activation", a.nonlinear.empty() ? "identity" : a.nonlinear);
  if (a.rank > 0) m.set("rank", std::to_string(a.rank));
  m.set("padded", a.pad ? "1" : "0");
  m.set("retain_raw", a.retain_raw ? "1" : "0");
  m.set("x_file", "X.skt");
  m.set("y_file", "y.skt");
  m.set("truth_file", "C_true.skt");
  m.write((dir / "meta.txt").string());
  out << "wrote " << a.n << " samples to " << dir.string() << '\n';
  return 0;
}

void residualize(Dataset& data, const std::string& path) {
  const NdArray z = read_csv(path);
  if (z.rank() != 2 || z.dims()[0] != data.n()) {
    throw ShapeError(path + ": expected " + std::to_string(data.n()) + " rows of covariates, got " +
                     dims_to_string(z.dims()));
  }
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto k = static_cast<Eigen::Index>(z.dims()[1]);
  Matrix design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = to_matrix(z);
  const Vector beta = ols(design, data.y);
  data.y -= design * beta;
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const Dims block = parse_dims(a.block);
  const bool auto_rank = a.rank == "auto";
  if (!auto_rank && (!a.lambda_grid.empty() || !a.rank_grid.empty())) {
    throw InvalidArgument("--lambda-grid and --rank-grid require --rank auto");
  }
  if (a.method != "linear" && a.method != "nonlinear" && a.method != "local") {
    throw InvalidArgument("unknown --method '" + a.method + "'");
  }
  if (a.method != "linear" && auto_rank) throw InvalidArgument("--rank auto is only available for --method linear");
  if (a.method != "linear" && a.hard_threshold) {
    throw InvalidArgument("--hard-threshold is only available for --method linear");
  }
  int rank = 0;
  if (!auto_rank) {
    try {
      std::size_t used = 0;
      rank = std::stoi(a.rank, &used);
      if (used != a.rank.size()) throw std::invalid_argument(a.rank);
    } catch (const std::exception&) {
      throw InvalidArgument("--rank must be a positive integer or 'auto', got '" + a.rank + "'");
    }
    if (rank < 1) throw InvalidArgument("--rank must be positive");
  }
  if (a.method == "local" && rank != 1) throw InvalidArgument("--method local fits a single term; use --rank 1");

  Dataset data = load_dataset(a.x, a.y, block, a.pad);
  if (!a.residualize.empty()) residualize(data, a.residualize);

  FitConfig cfg;
  if (a.kappa) cfg.kappa = *a.kappa;
  if (a.lambda_tgt) cfg.lambda_tgt = *a.lambda_tgt;
  if (a.lambda0) cfg.lambda0 = *a.lambda0;
  cfg.validate();

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m;
  m.set("image_dims", dims_text(data.shape.image_dims()));
  m.set("block_dims", dims_text(data.shape.block_dims()));
  m.set("n", std::to_string(data.n()));
  m.set("kappa", format_double(cfg.kappa));
  m.set("seed", std::to_string(a.seed));
  m.set("residualized", a.residualize.empty() ? "0" : "1");

  if (a.method == "nonlinear") {
    TrainConfig tc;
    tc.lambda = a.lambda_tgt.value_or(tc.lambda);
    tc.epochs = a.epochs;
    tc.step_size = a.step;
    tc.batch = a.batch;
    tc.seed = a.seed;
    tc.intercept = a.intercept;
    tc.validate();
    const Activation act = parse_activation(a.activation);
    const NonlinearFit fit = fit_nonlinear(data, rank, act, tc);
    write_skt((dir / "A.skt").string(), from_matrix(fit.model.maps));
    write_skt((dir / "B.skt").string(), from_matrix(fit.model.filters));
    write_coefficients(dir, coefficients(fit.model));
    write_loss_trace((dir / "trace.csv").string(), fit.loss_trace);
    m.set("kind", "nonlinear");
    m.set("rank", std::to_string(fit.model.rank()));
    m.set("activation", to_string(act));
    m.set("lambda_tgt", format_double(tc.lambda));
    m.set("intercept", format_double(fit.model.intercept));
    m.set("epochs_run", std::to_string(fit.epochs_run));
    m.set("converged", fit.converged ? "1" : "0");
    m.set("a_file", "A.skt");
    m.set("b_file", "B.skt");
    m.set("trace_file", "trace.csv");
    m.write((dir / kManifest).string());
    out << "nonlinear fit: rank " << fit.model.rank() << ", " << fit.epochs_run << " epochs, final loss "
        << format_double(fit.loss_trace.empty() ? 0.0 : fit.loss_trace.back()) << '\n';
    return 0;
  }

  if (a.method == "local") {
    const LocalSmoothingResult res = fit_local_smoothing(data, cfg.lambda_tgt, cfg);
    const auto q = static_cast<Eigen::Index>(data.block_size());
    write_skt((dir / "A.skt").string(), from_matrix(res.a));
    write_skt((dir / "B.skt").string(), from_matrix(Matrix::Constant(q, 1, 1.0 / static_cast<double>(q))));
    write_coefficients(dir, res.coefficients);
    m.set("kind", "local_smooth");
    m.set("rank", "1");
    m.set("activation", "identity");
    m.set("lambda_tgt", format_double(cfg.lambda_tgt));
    m.set("converged", res.converged ? "1" : "0");
    m.set("a_file", "A.skt");
    m.set("b_file", "B.skt");
    m.write((dir / kManifest).string());
    out << "local smoothing fit: " << (res.a.array() != 0.0).count() << " active blocks\n";
    return 0;
  }

  FitResult fit;
  double lambda_used = cfg.lambda_tgt;
  if (auto_rank) {
    const auto lambdas = parse_real_grid(a.lambda_grid.empty() ? "0.4:2:9" : a.lambda_grid);
    const auto ranks = parse_int_grid(a.rank_grid.empty() ? "1:5" : a.rank_grid);
    Selection sel = select_by_bic(data, lambdas, ranks, cfg);
    std::ofstream bic((dir / "bic.csv").string());
    if (!bic) throw IoError("cannot write " + (dir / "bic.csv").string());
    write_score_table(bic, sel.table);
    fit = std::move(sel.fit);
    lambda_used = sel.lambda;
    m.set("selected_rank", std::to_string(sel.rank));
    m.set("bic_file", "bic.csv");
  } else {
    fit = fit_multi_term(data, rank, cfg);
  }
  MultiTermModel model = fit.model;
  m.set("kind", model.rank() == 1 ? "one_term" : "multi_term");
  if (a.hard_threshold) {
    const ThresholdResult th = hard_threshold(model, *a.hard_threshold, data.n());
    model = th.model;
    m.set("hard_threshold_c", format_double(*a.hard_threshold));
    m.set("threshold", format_double(th.threshold));
    m.set("thresholded_entries", std::to_string(th.zeroed));
  }
  write_skt((dir / "A.skt").string(), from_matrix(model.abar));
  write_skt((dir / "B.skt").string(), from_matrix(model.bbar));
  write_coefficients(dir, coefficients(model));
  write_trace((dir / "trace.csv").string(), fit.trace);
  m.set("rank", std::to_string(model.rank()));
  m.set("activation", "identity");
  m.set("lambda_tgt", format_double(lambda_used));
  m.set("lambda0", format_double(fit.lambda0));
  m.set("status", to_string(fit.status));
  m.set("iterations", std::to_string(fit.iterations));
  m.set("s0", std::to_string(fit.s0));
  m.set("a_file", "A.skt");
  m.set("b_file", "B.skt");
  m.set("trace_file", "trace.csv");
  m.write((dir / kManifest).string());
  out << "linear fit: rank " << model.rank() << ", lambda " << format_double(lambda_used) << ", status "
      << to_string(fit.status) << ", " << fit.iterations << " iterations\n";
  return 0;
}

struct LoadedModel {
  Manifest manifest;
  std::string kind;
  KpdShape shape;
  MultiTermModel linear;
  NonlinearModel nonlinear;
  NdArray coefficients;
};

LoadedModel load_model(const std::string& dir_text) {
  const fs::path dir(dir_text);
  LoadedModel lm;
  lm.manifest = Manifest::read((dir / kManifest).string());
  lm.kind = lm.manifest.get("kind");
  lm.shape = KpdShape(parse_dims(lm.manifest.get("image_dims")), parse_dims(lm.manifest.get("block_dims")));
  const NdArray a = read_skt((dir / lm.manifest.get("a_file")).string());
  const NdArray b = read_skt((dir / lm.manifest.get("b_file")).string());
  const std::size_t rank = std::stoul(lm.manifest.get("rank"));
  if (a.rank() != 2 || b.rank() != 2 || a.dims()[0] != lm.shape.grid_size() ||
      b.dims()[0] != lm.shape.block_size() || a.dims()[1] != rank || b.dims()[1] != rank) {
    throw ShapeError(dir_text + ": stored factors " + dims_to_string(a.dims()) + " and " +
                     dims_to_string(b.dims()) + " disagree with the manifest");
  }
  if (lm.kind == "nonlinear") {
    lm.nonlinear = NonlinearModel{lm.shape, parse_activation(lm.manifest.get("activation")), to_matrix(a),
                                  to_matrix(b)};
    lm.nonlinear.intercept = std::stod(lm.manifest.get_or("intercept", "0"));
    lm.coefficients = coefficients(lm.nonlinear);
  } else if (lm.kind == "one_term" || lm.kind == "multi_term" || lm.kind == "local_smooth") {
    lm.linear = MultiTermModel{lm.shape, to_matrix(a), to_matrix(b)};
    lm.coefficients = coefficients(lm.linear);
  } else {
    throw IoError(dir_text + ": unknown model kind '" + lm.kind + "'");
  }
  return lm;
}

json number_or_null(std::optional<double> v) {
  if (!v || std::isnan(*v)) return nullptr;
  return *v;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const LoadedModel lm = load_model(a.model);
  const NdArray truth = read_skt(a.truth);
  if (truth.dims() != lm.shape.image_dims()) {
    throw ShapeError("truth " + dims_to_string(truth.dims()) + " does not match model image dims " +
                     dims_to_string(lm.shape.image_dims()));
  }
  const Rates rates = fpr_tpr(lm.coefficients, truth);
  std::optional<double> pred;
  if (!a.test.empty()) {
    const fs::path t(a.test);
    const Dataset test = load_dataset((t / "X.skt").string(), (t / "y.skt").string(), lm.shape.block_dims(), false);
    const Vector yhat = lm.kind == "nonlinear" ? predict(lm.nonlinear, test) : linear_response(test, lm.coefficients);
    pred = rmse_pred(yhat, test.y);
  }
  std::optional<double> p_value;
  std::size_t perm_valid = 0;
  if (a.perm > 0) {
    if (a.data.empty()) throw InvalidArgument("--perm needs the training data via --data DIR");
    if (lm.kind != "one_term" && lm.kind != "multi_term") {
      throw InvalidArgument("the permutation test refits linear SKPD models only");
    }
    const fs::path d(a.data);
    const Dataset train = load_dataset((d / "X.skt").string(), (d / "y.skt").string(), lm.shape.block_dims(), false);
    FitConfig cfg;
    cfg.kappa = std::stod(lm.manifest.get("kappa"));
    cfg.lambda_tgt = std::stod(lm.manifest.get("lambda_tgt"));
    const int rank = std::stoi(lm.manifest.get("rank"));
    PermutationOptions po;
    po.n_perm = a.perm;
    po.seed = a.perm_seed;
    const PermutationResult pr = permutation_region_test(
        train, region_mask(lm.coefficients),
        [&](const Dataset& d2) { return coefficients(fit_multi_term(d2, rank, cfg).model); }, po);
    p_value = pr.p_value;
    perm_valid = pr.valid;
  }
  json j;
  j["fpr"] = number_or_null(rates.fpr);
  j["tpr"] = number_or_null(rates.tpr);
  j["rmse"] = rmse_coeff(lm.coefficients, truth);
  j["rmse_pred"] = number_or_null(pred);
  j["p_value"] = number_or_null(p_value);
  j["reps"] = a.perm > 0 ? perm_valid : 1;
  j["seed"] = std::stoull(lm.manifest.get_or("seed", "0"));
  j["kind"] = lm.kind;
  j["rank"] = std::stoi(lm.manifest.get("rank"));
  const std::string text = j.dump(2) + "\n";
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw IoError("cannot write " + a.out);
    f << text;
  }
  out << text;
  return 0;
}

Method parse_method(const std::string& name) {
  if (name == "one-term" || name == "1-term") return Method::one_term;
  if (name == "r-term" || name == "R-term") return Method::r_term;
  if (name == "nonlinear") return Method::nonlinear;
  if (name == "local") return Method::local;
  throw InvalidArgument("unknown method '" + name + "'");
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  StudyConfig cfg = default_study(parse_study(a.study));
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  cfg.threads = std::max(1u, a.threads);
  if (a.n) cfg.n = *a.n;
  if (a.sigma) cfg.sigma = *a.sigma;
  if (!a.dims.empty()) cfg.image_dims = parse_dims(a.dims);
  if (!a.block.empty()) cfg.block_dims = parse_dims(a.block);
  if (!a.methods.empty()) {
    cfg.methods.clear();
    std::stringstream ss(a.methods);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.methods.push_back(parse_method(item));
  }
  ProgressFn progress;
  if (!a.quiet) progress = [&err](const std::string& msg) { err << msg << '\n'; };
  const StudyReport report = run_study(cfg, progress);

  std::ostringstream table;
  write_report(table, report);
  if (a.out.empty()) {
    out << table.str();
  } else {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.out);
    f << table.str();
    out << table.str();
  }
  if (!a.reps_out.empty()) {
    std::ofstream f(a.reps_out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.reps_out);
    write_report_reps(f, report);
  }
  return 0;
}

int cmd_mask(const MaskArgs& a, std::ostream& out) {
  const NdArray mask = butterfly_silhouette(parse_dims(a.dims));
  const fs::path p(a.out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_mask_pgm(a.out, mask);
  std::size_t on = 0;
  for (double v : mask.values()) on += v != 0.0;
  out << "wrote " << a.out << " (" << on << " signal pixels)\n";
  return 0;
}

int cmd_export(const ExportArgs& a, std::ostream& out) {
  export_heatmap(read_skt(a.in), a.out, a.format);
  out << "wrote " << a.out << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse Kronecker product decomposition for scalar-on-image regression", "skpd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "skpd 0.1.0");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Simulate a dataset with a planted coefficient image");
  g->add_option("--signal", gen.signal, "one-circle|three-circles|butterfly|one-ball|two-balls|mask:FILE")
      ->capture_default_str();
  g->add_option("--dims", gen.dims, "image dims, e.g. 128x128 or 40x48x40")->capture_default_str();
  g->add_option("--block", gen.block, "block dims used for padding and nonlinear responses (default 8 per axis)");
  g->add_option("--n", gen.n, "sample size")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--sigma", gen.sigma, "noise standard deviation")->capture_default_str()->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--nonlinear", gen.nonlinear, "activation for a nonlinear response (relu|sigmoid|identity)");
  g->add_option("--rank", gen.rank, "number of planted terms used by the nonlinear response");
  g->add_flag("--retain-raw", gen.retain_raw, "record that raw images are retained (always written to X.skt)");
  g->add_flag("--pad", gen.pad, "zero-pad images to the next block multiple");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit an SKPD model");
  f->add_option("--x", fit.x, "stacked images (SKT)")->required();
  f->add_option("--y", fit.y, "responses (SKT)")->required();
  f->add_option("--block", fit.block, "block dims")->capture_default_str();
  f->add_option("--rank", fit.rank, "number of terms, or 'auto' for BIC selection")->capture_default_str();
  f->add_option("--lambda-grid", fit.lambda_grid, "lo:hi:count or comma list (with --rank auto)");
  f->add_option("--rank-grid", fit.rank_grid, "lo:hi or comma list (with --rank auto)");
  f->add_option("--kappa", fit.kappa, "path-following decay in (0, 1)");
  f->add_option("--lambda-tgt", fit.lambda_tgt, "target penalty");
  f->add_option("--lambda0", fit.lambda0, "initial penalty (default: automatic)");
  f->add_option("--hard-threshold", fit.hard_threshold, "hard-threshold constant c");
  f->add_option("--method", fit.method, "linear|nonlinear|local")->capture_default_str();
  f->add_option("--activation", fit.activation, "nonlinear activation")->capture_default_str();
  f->add_flag("--intercept", fit.intercept, "nonlinear: fit an unpenalized intercept");
  f->add_option("--epochs", fit.epochs, "nonlinear epochs")->capture_default_str();
  f->add_option("--step", fit.step, "nonlinear initial step size")->capture_default_str();
  f->add_option("--batch", fit.batch, "nonlinear minibatch size (0 = full batch)")->capture_default_str();
  f->add_option("--seed", fit.seed, "seed for nonlinear initialization")->capture_default_str();
  f->add_option("--residualize", fit.residualize, "CSV of covariates regressed out of y first");
  f->add_flag("--pad", fit.pad, "zero-pad images to the next block multiple");
  f->add_option("--out", fit.out, "model directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a fitted model as JSON metrics");
  e->add_option("--model", ev.model, "model directory")->required();
  e->add_option("--truth", ev.truth, "true coefficient image (SKT)")->required();
  e->add_option("--test", ev.test, "test dataset directory with X.skt and y.skt");
  e->add_option("--perm", ev.perm, "permutation replicates for the region test");
  e->add_option("--perm-seed", ev.perm_seed, "permutation seed")->capture_default_str();
  e->add_option("--data", ev.data, "training dataset directory (for --perm)");
  e->add_option("--out", ev.out, "also write the JSON here");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Run a replicated simulation study and print the median table");
  b->add_option("--study", bench.study, "circle|three-circles|butterfly|nonlinear|one-ball|two-balls")
      ->capture_default_str();
  b->add_option("--reps", bench.reps, "replications")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--seed", bench.seed, "study seed")->capture_default_str();
  b->add_option("--out", bench.out, "median table CSV");
  b->add_option("--reps-out", bench.reps_out, "per-replication CSV");
  b->add_option("--methods", bench.methods, "comma list of one-term,r-term,nonlinear,local");
  b->add_option("--n", bench.n, "override sample size");
  b->add_option("--sigma", bench.sigma, "override noise level");
  b->add_option("--dims", bench.dims, "override image dims");
  b->add_option("--block", bench.block, "override block dims");
  b->add_option("--threads", bench.threads, "worker threads over replications")->capture_default_str();
  b->add_flag("--quiet", bench.quiet, "no progress output");

  MaskArgs mask;
  auto* mk = app.add_subcommand("mask", "Write the bundled butterfly silhouette as a PGM mask");
  mk->add_option("--out", mask.out, "output PGM")->required();
  mk->add_option("--dims", mask.dims, "mask dims")->capture_default_str();

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "Render a 2D array (or the middle slice of a 3D one) as PGM or CSV");
  x->add_option("--in", ex.in, "input SKT")->required();
  x->add_option("--out", ex.out, "output path")->required();
  x->add_option("--format", ex.format, "pgm|csv")->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe, out, err);
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*f) return cmd_fit(fit, out);
    if (*e) return cmd_eval(ev, out);
    if (*b) return cmd_bench(bench, out, err);
    if (*mk) return cmd_mask(mask, out);
    if (*x) return cmd_export(ex, out);
  } catch (const std::exception& ex_) {
    err << "skpd: error: " << ex_.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace skpd::cli
