#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "autopinn/config.hpp"
#include "autopinn/errors.hpp"
#include "doctest.h"

using namespace autopinn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("autopinn_cfg_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_cfg(const fs::path& dir, const std::string& name,
                      const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary);
  out << text;
  REQUIRE(out.good());
  return p.string();
}

ConfigEntry fe(const std::string& key, const std::string& value) {
  return {key, value, "flag --" + key, true};
}

const SpaceDim& dim_of(const RunConfig& c, const std::string& name) {
  const int d = c.space.find(name);
  REQUIRE(d >= 0);
  return c.space.dims[d];
}

}  // namespace

TEST_CASE("a minimal config resolves the documented defaults") {
  const auto dir = temp_dir("minimal");
  const auto path = write_cfg(dir, "run.cfg", "problem = helmholtz2d\n");
  const RunConfig c = parse_config(path);

  CHECK(c.problem == "helmholtz2d");
  CHECK(c.a1 == 1.0);
  CHECK(c.a2 == 4.0);
  CHECK(c.k == 1.0);
  CHECK(c.mode == RunMode::Full);
  CHECK(c.net == NetKind::FCNN);
  CHECK(c.activation == ActivationKind::TG);
  CHECK(c.seed == 0);
  CHECK(c.jobs == 1);
  CHECK(c.bo_init == 10);
  CHECK(c.bo_iter == 20);
  CHECK(c.out_dir.empty());
  CHECK(!c.hyper.has_value());
  CHECK(c.overrides.empty());

  CHECK(c.plan.pretrain_iters == 500);
  CHECK(c.plan.stage2_iters == 5000);
  CHECK(c.plan.stage3_iters == 10000);
  CHECK(c.plan.ema_period == 1000);
  CHECK(c.plan.rar_rounds == 10);
  CHECK(c.plan.rar_candidates == 1000);
  CHECK(c.plan.rar_new == 50);

  REQUIRE(c.space.size() == 7);
  CHECK(dim_of(c, "layers").lo == 2.0);
  CHECK(dim_of(c, "layers").hi == 8.0);
  CHECK(dim_of(c, "neurons").lo == 20.0);
  CHECK(dim_of(c, "neurons").hi == 80.0);
  CHECK(dim_of(c, "lr").lo == 0.001);
  CHECK(dim_of(c, "lr").hi == 0.01);
  CHECK(dim_of(c, "lr").step == 0.001);
  CHECK(dim_of(c, "n_domain").lo == 500.0);
  CHECK(dim_of(c, "n_domain").hi == 5000.0);
  CHECK(dim_of(c, "n_boundary").lo == 100.0);
  CHECK(dim_of(c, "n_boundary").hi == 3000.0);
  CHECK(dim_of(c, "w_B").lo == 0.01);
  CHECK(dim_of(c, "w_B").hi == 0.25);
  CHECK(c.space.find("n_initial") == -1);
  CHECK(c.space.find("w_I") == -1);

  // Time-dependent problems add the initial-condition dimensions.
  const RunConfig b = resolve_config({fe("problem", "burgers1d")});
  CHECK(b.space.size() == 9);
  CHECK(dim_of(b, "n_initial").lo == 100.0);
  CHECK(dim_of(b, "n_initial").hi == 1200.0);
  CHECK(dim_of(b, "w_I").hi == 0.10);
  CHECK(b.nu == 0.01 / 3.14159265358979323846);
}

TEST_CASE("out-of-range values are rejected citing the valid range") {
  const auto dir = temp_dir("range");
  const auto path =
      write_cfg(dir, "run.cfg", "problem = helmholtz2d\nlr = 0.5\n");
  CHECK_THROWS_WITH_AS(parse_config(path),
                       (path + ": line 2: lr = 0.5 outside [0.001, 0.01]").c_str(),
                       ValidationError);

  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"), fe("n_domain", "200")}),
      "flag --n_domain: n_domain = 200 outside [500, 5000]", ValidationError);
  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"), fe("layers", "9")}),
      "flag --layers: layers = 9 outside [2, 8]", ValidationError);

  // Residual nets search a shallower depth range, and the bound follows.
  CHECK_THROWS_WITH_AS(resolve_config({fe("problem", "helmholtz2d"),
                                       fe("net", "resnet"), fe("layers", "6")}),
                       "flag --layers: layers = 6 outside [1, 4]",
                       ValidationError);

  // Widening the space first makes the same value legal.
  const RunConfig c = resolve_config({fe("problem", "helmholtz2d"),
                                      fe("space.n_boundary.hi", "3500"),
                                      fe("n_boundary", "3500")});
  CHECK(dim_of(c, "n_boundary").lo == 3500.0);
  CHECK(dim_of(c, "n_boundary").hi == 3500.0);

  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"), fe("layers", "2.5")}),
      "flag --layers: layers must be an integer", ValidationError);
}

TEST_CASE("later entries win and flags override the file") {
  const auto dir = temp_dir("precedence");
  const auto path = write_cfg(dir, "run.cfg",
                              "problem = helmholtz2d\n"
                              "mode = full\n"
                              "seed = 1\n");
  const RunConfig c = parse_config(path, {fe("mode", "preset"), fe("seed", "2"),
                                          fe("seed", "3")});
  CHECK(c.mode == RunMode::Preset);
  CHECK(c.seed == 3);
  REQUIRE(c.hyper.has_value());
  CHECK(c.hyper->layers == 2);
  CHECK(c.hyper->width == 74);

  // Duplicates inside one file are mistakes, not overrides.
  const auto dup = write_cfg(dir, "dup.cfg",
                             "problem = helmholtz2d\nseed = 1\nseed = 2\n");
  CHECK_THROWS_WITH_AS(parse_config(dup),
                       (dup + ": line 3: duplicate key 'seed' (already set at " +
                        dup + ": line 2)")
                           .c_str(),
                       ValidationError);
}

TEST_CASE("unknown and inapplicable keys are rejected with their location") {
  const auto dir = temp_dir("unknown");
  const auto path =
      write_cfg(dir, "run.cfg", "problem = helmholtz2d\nproblemo = 3\n");
  CHECK_THROWS_WITH_AS(parse_config(path),
                       (path + ": line 2: unknown key 'problemo'").c_str(),
                       ValidationError);

  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"), fe("nu", "0.1")}),
      "flag --nu: key 'nu' applies only to burgers1d", ValidationError);
  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "burgers1d"), fe("a1", "2")}),
      "flag --a1: key 'a1' applies only to helmholtz2d", ValidationError);
  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "poisson3d"), fe("w_I", "0.05")}),
      "flag --w_I: key 'w_I' applies only to problems with an initial condition",
      ValidationError);
  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"), fe("n", "3")}),
      "flag --n: key 'n' applies only to poisson problems", ValidationError);
  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"),
                      fe("space.n_initial.lo", "100")}),
      "flag --space.n_initial.lo: no search dimension 'n_initial' for helmholtz2d",
      ValidationError);
  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"), fe("space.lr.max", "1")}),
      "flag --space.lr.max: unknown space field 'max' (expected lo, hi, or step)",
      ValidationError);
  CHECK_THROWS_AS(resolve_config({fe("problem", "waves3d")}), ValidationError);
  CHECK_THROWS_AS(resolve_config({}), ValidationError);
}

TEST_CASE("config files reject malformed lines by number") {
  const auto dir = temp_dir("malformed");
  const auto no_eq =
      write_cfg(dir, "a.cfg", "problem = helmholtz2d\njust words\n");
  CHECK_THROWS_WITH_AS(parse_config(no_eq),
                       (no_eq + ": line 2: expected 'key = value'").c_str(),
                       ValidationError);

  const auto empty_val = write_cfg(dir, "b.cfg", "problem =\n");
  CHECK_THROWS_WITH_AS(parse_config(empty_val),
                       (empty_val + ": line 1: empty value for key 'problem'").c_str(),
                       ValidationError);

  const auto bad_num =
      write_cfg(dir, "c.cfg", "problem = helmholtz2d\nseed = twelve\n");
  CHECK_THROWS_WITH_AS(parse_config(bad_num),
                       (bad_num + ": line 2: malformed seed 'twelve'").c_str(),
                       ValidationError);

  CHECK_THROWS_AS(parse_config((dir / "missing.cfg").string()), RuntimeError);

  // Comments and blank lines parse away.
  const auto commented = write_cfg(dir, "d.cfg",
                                   "# benchmark selection\n"
                                   "\n"
                                   "problem = helmholtz2d\n"
                                   "  # indented comment\n"
                                   "seed = 4\n");
  CHECK(parse_config(commented).seed == 4);
}

TEST_CASE("poisson names and dimension counts agree") {
  CHECK(resolve_config({fe("problem", "poisson")}).problem == "poisson3d");
  CHECK(resolve_config({fe("problem", "poisson")}).n == 3);
  CHECK(resolve_config({fe("problem", "poisson5d")}).n == 5);
  const RunConfig c =
      resolve_config({fe("problem", "poisson"), fe("n", "4")});
  CHECK(c.problem == "poisson4d");
  CHECK(c.n == 4);
  CHECK(resolve_config({fe("problem", "poisson2d"), fe("n", "2")}).n == 2);

  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "poisson3d"), fe("n", "5")}),
      "flag --n: n = 5 conflicts with problem 'poisson3d'", ValidationError);
  CHECK_THROWS_WITH_AS(resolve_config({fe("problem", "poisson9d")}),
                       "flag --problem: poisson dimension must be in [2, 8]",
                       ValidationError);
  CHECK_THROWS_WITH_AS(resolve_config({fe("problem", "poisson12d")}),
                       "flag --problem: unknown problem 'poisson12d'",
                       ValidationError);
}

TEST_CASE("bare keys pin search dimensions in search modes") {
  const RunConfig c = resolve_config({fe("problem", "helmholtz2d"),
                                      fe("lr", "0.004"),
                                      fe("n_domain", "1000")});
  CHECK(!c.hyper.has_value());
  CHECK(c.overrides.size() == 2);
  CHECK(dim_of(c, "lr").lo == 0.004);
  CHECK(dim_of(c, "lr").hi == 0.004);
  CHECK(dim_of(c, "n_domain").lo == 1000.0);
  CHECK(dim_of(c, "n_domain").hi == 1000.0);
  CHECK(dim_of(c, "neurons").lo == 20.0);
  CHECK(dim_of(c, "neurons").hi == 80.0);
}

TEST_CASE("preset rows absorb explicit overrides") {
  const RunConfig c = resolve_config({fe("problem", "helmholtz2d"),
                                      fe("mode", "preset"), fe("lr", "0.004")});
  REQUIRE(c.hyper.has_value());
  CHECK(c.hyper->lr == 0.004);
  CHECK(c.hyper->layers == 2);
  CHECK(c.hyper->width == 74);
  CHECK(c.hyper->n_domain == 1350);
  CHECK(c.hyper->n_boundary == 1650);
  CHECK(c.hyper->w_R == 0.0144);
  CHECK(c.hyper->w_B == 0.2406);
  CHECK(!c.hyper->n_initial.has_value());

  const RunConfig b =
      resolve_config({fe("problem", "burgers1d"), fe("mode", "preset")});
  REQUIRE(b.hyper.has_value());
  CHECK(b.hyper->n_initial == 1100);
  CHECK(b.hyper->w_I == 0.0815);

  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "poisson6d"), fe("mode", "preset")}),
      "unknown preset 'poisson6d'", ValidationError);
}

TEST_CASE("train-only mode requires the full row") {
  std::vector<ConfigEntry> entries = {
      fe("problem", "helmholtz2d"), fe("mode", "train-only"),
      fe("layers", "2"),  fe("neurons", "30"),     fe("lr", "0.005"),
      fe("n_domain", "600"), fe("n_boundary", "200"), fe("w_R", "0.05")};
  CHECK_THROWS_WITH_AS(resolve_config(entries),
                       "train-only mode requires key 'w_B'", ValidationError);

  entries.push_back(fe("w_B", "0.1"));
  const RunConfig c = resolve_config(entries);
  REQUIRE(c.hyper.has_value());
  CHECK(c.hyper->layers == 2);
  CHECK(c.hyper->width == 30);
  CHECK(c.hyper->lr == 0.005);
  CHECK(c.hyper->n_domain == 600);
  CHECK(c.hyper->n_boundary == 200);
  CHECK(c.hyper->w_R == 0.05);
  CHECK(c.hyper->w_B == 0.1);
  CHECK(!c.hyper->n_initial.has_value());
  CHECK(!c.hyper->w_I.has_value());

  // Time-dependent problems extend the required roster.
  std::vector<ConfigEntry> b = entries;
  b[0] = fe("problem", "burgers1d");
  CHECK_THROWS_WITH_AS(resolve_config(b),
                       "train-only mode requires key 'n_initial'",
                       ValidationError);
}

TEST_CASE("bo-only mode zeroes the adaptation stages") {
  const RunConfig c =
      resolve_config({fe("problem", "helmholtz2d"), fe("mode", "bo-only")});
  CHECK(c.plan.stage2_iters == 0);
  CHECK(c.plan.stage3_iters == 0);
  CHECK(c.plan.rar_rounds == 0);
  CHECK(c.plan.pretrain_iters == 500);

  CHECK_THROWS_WITH_AS(
      resolve_config({fe("problem", "helmholtz2d"), fe("mode", "bo-only"),
                      fe("plan.stage2_iters", "100")}),
      "flag --plan.stage2_iters: plan.stage2_iters must be 0 in bo-only mode",
      ValidationError);
  CHECK_NOTHROW(
      resolve_config({fe("problem", "helmholtz2d"), fe("mode", "bo-only"),
                      fe("plan.stage2_iters", "0")}));
}

TEST_CASE("serialized configs parse back to the same bytes") {
  const auto dir = temp_dir("roundtrip");
  const auto check_identity = [&](const std::vector<ConfigEntry>& entries,
                                  const std::string& tag) {
    CAPTURE(tag);
    const RunConfig c = resolve_config(entries);
    const std::string echo = serialize_config(c);
    const auto path = write_cfg(dir, tag + ".cfg", echo);
    const RunConfig back = parse_config(path);
    CHECK(back.problem == c.problem);
    CHECK(back.mode == c.mode);
    CHECK(back.hyper == c.hyper);
    CHECK(back.overrides == c.overrides);
    CHECK(back.seed == c.seed);
    CHECK(serialize_config(back) == echo);
  };

  check_identity({fe("problem", "helmholtz2d"), fe("a1", "2"),
                  fe("lr", "0.004"), fe("seed", "18446744073709551615"),
                  fe("out_dir", "runs/h"), fe("space.neurons.hi", "40")},
                 "full_pins");
  check_identity({fe("problem", "poisson4d"), fe("mode", "preset"),
                  fe("n_domain", "2000"), fe("jobs", "4")},
                 "preset_override");
  check_identity({fe("problem", "burgers1d"), fe("mode", "train-only"),
                  fe("reference", "data/b.csv"), fe("layers", "7"),
                  fe("neurons", "35"), fe("lr", "0.006"),
                  fe("n_domain", "4250"), fe("n_boundary", "1900"),
                  fe("n_initial", "1100"), fe("w_R", "0.041"),
                  fe("w_B", "0.0593"), fe("w_I", "0.0815"),
                  fe("nu", "0.05")},
                 "train_only");
  check_identity({fe("problem", "poisson2d"), fe("mode", "bo-only"),
                  fe("bo.init", "3"), fe("bo.iter", "2"),
                  fe("net", "resnet"), fe("activation", "tanh")},
                 "bo_only");
}

TEST_CASE("problem construction honors the configured parameters") {
  RunConfig c = resolve_config({fe("problem", "helmholtz2d"), fe("a1", "2"),
                                fe("a2", "3"), fe("k", "0.5")});
  const PdeProblem h = make_problem(c);
  CHECK(h.name() == "helmholtz2d");
  CHECK(h.a1() == 2.0);
  CHECK(h.a2() == 3.0);
  CHECK(h.k() == 0.5);

  const PdeProblem p =
      make_problem(resolve_config({fe("problem", "poisson4d")}));
  CHECK(p.name() == "poisson4d");
  CHECK(p.input_dim() == 4);

  // Burgers truth comes from a dataset, so a run without one must fail
  // before any training.
  RunConfig b = resolve_config({fe("problem", "burgers1d")});
  CHECK_THROWS_AS(make_problem(b), ValidationError);

  const auto dir = temp_dir("ref");
  const auto ref = write_cfg(dir, "ref.csv",
                             "x_1,x_2,u_1\n"
                             "0,0.5,0.1\n"
                             "-0.5,1,0.02\n");
  b = resolve_config({fe("problem", "burgers1d"), fe("reference", ref),
                      fe("nu", "0.01")});
  const PdeProblem battached = make_problem(b);
  CHECK(battached.has_truth());
  CHECK(battached.eval_points().rows() == 2);
  CHECK(battached.nu() == 0.01);
}
