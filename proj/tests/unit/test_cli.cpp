#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "skpd/dataset.hpp"
#include "skpd/io.hpp"
#include "skpd/skpd_linear.hpp"
#include "skpd/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "skpd");
  std::ostringstream out, err;
  const int code = skpd::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "skpd_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("bad invocations exit nonzero") {
  const fs::path d = workdir("errors");
  CHECK(cli({}).code != 0);
  CHECK(cli({"gen", "--out", d.string(), "--bogus"}).code != 0);
  CHECK(cli({"frobnicate"}).code != 0);
  Run missing = cli({"fit", "--x", (d / "nope.skt").string(), "--y", (d / "nope2.skt").string(), "--out",
                     (d / "m").string()});
  CHECK(missing.code != 0);
  CHECK(missing.err.find("error") != std::string::npos);

  REQUIRE(cli({"gen", "--signal", "one-circle", "--dims", "32x32", "--n", "150", "--out", (d / "data").string()})
              .code == 0);
  const std::string x = (d / "data" / "X.skt").string(), y = (d / "data" / "y.skt").string();
  CHECK(cli({"fit", "--x", x, "--y", y, "--rank", "2", "--rank-grid", "1:3", "--out", (d / "m").string()}).code != 0);
  CHECK(cli({"fit", "--x", x, "--y", y, "--method", "local", "--rank", "2", "--out", (d / "m").string()}).code != 0);
  CHECK(cli({"fit", "--x", x, "--y", y, "--method", "nonlinear", "--hard-threshold", "1", "--out",
             (d / "m").string()})
            .code != 0);
  CHECK(cli({"fit", "--x", x, "--y", y, "--method", "magic", "--out", (d / "m").string()}).code != 0);
  CHECK(cli({"fit", "--x", x, "--y", y, "--block", "5x5", "--out", (d / "m").string()}).code != 0);
  CHECK(cli({"gen", "--signal", "one-circle", "--dims", "30x30", "--out", (d / "bad").string()}).code != 0);
  CHECK(cli({"eval", "--model", (d / "none").string(), "--truth", x}).code != 0);
}

TEST_CASE("gen, fit and eval on one circle") {
  const fs::path d = workdir("circle");
  REQUIRE(cli({"gen", "--signal", "one-circle", "--dims", "128x128", "--n", "1000", "--sigma", "1.0", "--seed",
               "7", "--out", (d / "data").string()})
              .code == 0);
  for (const char* f : {"X.skt", "y.skt", "C_true.skt", "meta.txt"}) CHECK(fs::exists(d / "data" / f));
  CHECK(skpd::read_skt((d / "data" / "X.skt").string()).dims() == skpd::Dims{1000, 128, 128});

  Run fit = cli({"fit", "--x", (d / "data" / "X.skt").string(), "--y", (d / "data" / "y.skt").string(), "--block",
                 "8x8", "--rank", "1", "--out", (d / "model").string()});
  REQUIRE(fit.code == 0);
  for (const char* f : {"manifest.txt", "A.skt", "B.skt", "C_hat.skt", "C_hat.pgm", "trace.csv"}) {
    CHECK(fs::exists(d / "model" / f));
  }
  Run ev = cli({"eval", "--model", (d / "model").string(), "--truth", (d / "data" / "C_true.skt").string()});
  REQUIRE(ev.code == 0);
  json j = json::parse(ev.out);
  CHECK(j["tpr"].get<double>() >= 0.95);
  CHECK(j.contains("rmse"));
  CHECK(j["p_value"].is_null());

  // The reloaded model reproduces its own C-hat and metrics.
  const skpd::NdArray saved = skpd::read_skt((d / "model" / "C_hat.skt").string());
  Run again = cli({"eval", "--model", (d / "model").string(), "--truth", (d / "data" / "C_true.skt").string(),
                   "--out", (d / "metrics.json").string()});
  CHECK(again.out == ev.out);
  CHECK(json::parse(slurp(d / "metrics.json")) == j);
  skpd::Manifest m = skpd::Manifest::read((d / "model" / "manifest.txt").string());
  CHECK(m.get("kind") == "one_term");
  CHECK(m.get("block_dims") == "8x8");
  CHECK(saved.dims() == skpd::Dims{128, 128});

  Run fit2 = cli({"fit", "--x", (d / "data" / "X.skt").string(), "--y", (d / "data" / "y.skt").string(), "--block",
                  "8x8", "--rank", "1", "--out", (d / "model2").string()});
  REQUIRE(fit2.code == 0);
  for (const char* f : {"manifest.txt", "A.skt", "B.skt", "C_hat.skt", "trace.csv"}) {
    CHECK(slurp(d / "model" / f) == slurp(d / "model2" / f));
  }
}

TEST_CASE("fit --rank auto picks the best grid cell") {
  const fs::path d = workdir("auto");
  REQUIRE(cli({"gen", "--signal", "three-circles", "--dims", "32x32", "--n", "400", "--seed", "3", "--out",
               (d / "data").string()})
              .code == 0);
  const std::string x = (d / "data" / "X.skt").string(), y = (d / "data" / "y.skt").string();
  REQUIRE(cli({"fit", "--x", x, "--y", y, "--rank", "auto", "--lambda-grid", "0.4,1,2", "--rank-grid", "1:2",
               "--out", (d / "model").string()})
              .code == 0);

  std::ifstream bic(d / "model" / "bic.csv");
  std::string line;
  std::getline(bic, line);
  double best = 1e300, best_lambda = 0;
  int best_rank = 0;
  while (std::getline(bic, line)) {
    std::stringstream ss(line);
    std::string f[5];
    for (auto& s : f) std::getline(ss, s, ',');
    const double v = std::stod(f[4]);
    if (v < best) {
      best = v;
      best_lambda = std::stod(f[0]);
      best_rank = std::stoi(f[1]);
    }
  }
  skpd::Manifest m = skpd::Manifest::read((d / "model" / "manifest.txt").string());
  CHECK(std::stod(m.get("lambda_tgt")) == best_lambda);
  CHECK(std::stoi(m.get("selected_rank")) == best_rank);

  const skpd::Dataset data = skpd::make_dataset(skpd::read_skt(x), Eigen::Map<const skpd::Vector>(skpd::read_skt(y).values().data(), 400),
                                                {8, 8});
  skpd::Selection sel = skpd::select_by_bic(data, {0.4, 1, 2}, {1, 2}, skpd::FitConfig{});
  CHECK(skpd::read_skt((d / "model" / "C_hat.skt").string()) == skpd::coefficients(sel.fit.model));
}

TEST_CASE("other fit methods and helpers") {
  const fs::path d = workdir("methods");
  REQUIRE(cli({"gen", "--signal", "one-circle", "--dims", "32x32", "--n", "300", "--out", (d / "data").string()})
              .code == 0);
  const std::string x = (d / "data" / "X.skt").string(), y = (d / "data" / "y.skt").string();
  const std::string truth = (d / "data" / "C_true.skt").string();

  REQUIRE(cli({"fit", "--x", x, "--y", y, "--method", "local", "--lambda-tgt", "0.5", "--out", (d / "local").string()})
              .code == 0);
  CHECK(skpd::Manifest::read((d / "local" / "manifest.txt").string()).get("kind") == "local_smooth");
  CHECK(cli({"eval", "--model", (d / "local").string(), "--truth", truth}).code == 0);

  REQUIRE(cli({"fit", "--x", x, "--y", y, "--rank", "1", "--hard-threshold", "0.5", "--out", (d / "ht").string()})
              .code == 0);
  CHECK(skpd::Manifest::read((d / "ht" / "manifest.txt").string()).has("threshold"));

  REQUIRE(cli({"gen", "--signal", "three-circles", "--dims", "32x32", "--n", "200", "--nonlinear", "relu", "--out",
               (d / "nl").string()})
              .code == 0);
  REQUIRE(cli({"gen", "--signal", "three-circles", "--dims", "32x32", "--n", "100", "--seed", "8", "--nonlinear",
               "relu", "--out", (d / "nl_test").string()})
              .code == 0);
  REQUIRE(cli({"fit", "--x", (d / "nl" / "X.skt").string(), "--y", (d / "nl" / "y.skt").string(), "--method",
               "nonlinear", "--rank", "2", "--epochs", "20", "--lambda-tgt", "0.5", "--out", (d / "nlm").string()})
              .code == 0);
  Run ev = cli({"eval", "--model", (d / "nlm").string(), "--truth", (d / "nl" / "C_true.skt").string(), "--test",
                (d / "nl_test").string()});
  REQUIRE(ev.code == 0);
  CHECK(json::parse(ev.out)["rmse_pred"].is_number());

  std::ofstream cov(d / "cov.csv");
  for (int i = 0; i < 300; ++i) cov << (i % 7) << ',' << (i % 2) << '\n';
  cov.close();
  CHECK(cli({"fit", "--x", x, "--y", y, "--residualize", (d / "cov.csv").string(), "--out", (d / "res").string()})
            .code == 0);

  REQUIRE(cli({"fit", "--x", x, "--y", y, "--rank", "1", "--out", (d / "lin").string()}).code == 0);
  Run perm = cli({"eval", "--model", (d / "lin").string(), "--truth", truth, "--perm", "3", "--data",
                  (d / "data").string()});
  REQUIRE(perm.code == 0);
  json pj = json::parse(perm.out);
  CHECK(pj["p_value"].is_number());
  CHECK(pj["reps"].get<int>() == 3);

  CHECK(cli({"export", "--in", truth, "--out", (d / "c.csv").string(), "--format", "csv"}).code == 0);
  CHECK(cli({"mask", "--dims", "64x64", "--out", (d / "m.pgm").string()}).code == 0);
  CHECK(skpd::read_pgm((d / "m.pgm").string()).dims() == skpd::Dims{64, 64});

  REQUIRE(cli({"mask", "--dims", "30x30", "--out", (d / "m30.pgm").string()}).code == 0);
  REQUIRE(cli({"gen", "--signal", "mask:" + (d / "m30.pgm").string(), "--dims", "30x30", "--block", "8x8", "--pad",
               "--n", "50", "--out", (d / "pad").string()})
              .code == 0);
  CHECK(skpd::read_skt((d / "pad" / "X.skt").string()).dims() == skpd::Dims{50, 32, 32});
}

TEST_CASE("bench output is byte reproducible") {
  const fs::path d = workdir("bench");
  const std::vector<std::string> common{"bench", "--study", "circle", "--reps", "2", "--seed", "1", "--dims", "32x32",
                                        "--n", "300", "--methods", "one-term", "--quiet"};
  auto a = common, b = common;
  a.insert(a.end(), {"--out", (d / "a.csv").string()});
  b.insert(b.end(), {"--out", (d / "b.csv").string(), "--threads", "2"});
  REQUIRE(cli(a).code == 0);
  REQUIRE(cli(b).code == 0);
  CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
  CHECK(slurp(d / "a.csv").rfind("study,method,n,sigma,reps,fpr_pct,tpr_pct,rmse_x100,pred_rmse,rank", 0) == 0);
}
