// End-to-end checks of the command-line tool. MVREC_CLI is the path to the
// built binary, injected by the build.
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvrec/io.hpp"

using namespace mvrec;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("mvrec-cli-" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run(const std::string& args) {
  const fs::path log = work_dir() / "run.log";
  const std::string cmd =
      std::string(MVREC_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream buf;
  buf << in.rdbuf();
  r.output = buf.str();
  return r;
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

// Byte-compare two directory trees (same relative paths, same contents).
bool trees_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  }
  std::size_t b_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    b_files += e.is_regular_file();
  }
  if (b_files != rel.size()) return false;
  for (const fs::path& r : rel) {
    if (!fs::exists(b / r)) return false;
    if (read_text(a / r) != read_text(b / r)) return false;
  }
  return true;
}

const std::string kTinyGen = "--scenes 3 --views 2 --res 8 --img 16 --seed 5";

// Shared tiny dataset for the train/eval/mesh cases below.
const fs::path& dataset_dir() {
  static const fs::path dir = [] {
    const fs::path d = work_dir() / "data";
    const RunResult r = run("gen --out " + d.string() + " " + kTinyGen);
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

const std::string kTinyNet =
    "--epochs 1 --batch 2 --c1 2 --c2 4 --c3 4 --threads 1";

}  // namespace

TEST_CASE("gen: reports counts and reruns byte-identically") {
  const RunResult r = run("gen --out " + (work_dir() / "g1").string() + " " + kTinyGen);
  CHECK(r.code == 0);
  // 3 scenes x 2 views: 12 images (silhouette + depth), 6 grids.
  CHECK(r.output.find("wrote 3 scenes x 2 views") != std::string::npos);
  CHECK(r.output.find("12 images") != std::string::npos);
  CHECK(r.output.find("6 grids") != std::string::npos);

  const RunResult r2 = run("gen --out " + (work_dir() / "g2").string() + " " + kTinyGen);
  CHECK(r2.code == 0);
  CHECK(trees_identical(work_dir() / "g1", work_dir() / "g2"));

  // A different seed changes the tree.
  const RunResult r3 = run("gen --out " + (work_dir() / "g3").string() +
                           " --scenes 3 --views 2 --res 8 --img 16 --seed 6");
  CHECK(r3.code == 0);
  CHECK(!trees_identical(work_dir() / "g1", work_dir() / "g3"));
}

TEST_CASE("train: loss selection controls the consistency column") {
  const fs::path mvc_out = work_dir() / "t-mvc";
  const RunResult r = run("train --data " + dataset_dir().string() + " --out " +
                          mvc_out.string() + " --loss mvc " + kTinyNet);
  CHECK(r.code == 0);
  CHECK(fs::exists(mvc_out / "checkpoint.prm"));
  CHECK(fs::exists(mvc_out / "history.csv"));

  const std::string mvc_hist = read_text(mvc_out / "history.csv");
  CHECK(mvc_hist.substr(0, mvc_hist.find('\n')) ==
        "epoch,lr,total,l3d,lmvc,val_iou,val_cd");
  CHECK(line_count(mvc_hist) == 2);  // header + one epoch

  // Parse the lmvc column of the single data row.
  std::istringstream row(mvc_hist.substr(mvc_hist.find('\n') + 1));
  std::string field;
  std::vector<std::string> fields;
  while (std::getline(row, field, ',')) fields.push_back(field);
  REQUIRE(fields.size() == 7);
  CHECK(std::stod(fields[4]) > 0.0);

  const fs::path l3d_out = work_dir() / "t-3d";
  const RunResult r2 = run("train --data " + dataset_dir().string() + " --out " +
                           l3d_out.string() + " --loss 3d " + kTinyNet);
  CHECK(r2.code == 0);
  const std::string l3d_hist = read_text(l3d_out / "history.csv");
  std::istringstream row2(l3d_hist.substr(l3d_hist.find('\n') + 1));
  fields.clear();
  while (std::getline(row2, field, ',')) fields.push_back(field);
  REQUIRE(fields.size() == 7);
  CHECK(std::stod(fields[4]) == 0.0);

  // Identical command, identical history bytes.
  const fs::path again = work_dir() / "t-mvc2";
  run("train --data " + dataset_dir().string() + " --out " + again.string() +
      " --loss mvc " + kTinyNet);
  CHECK(read_text(again / "history.csv") == mvc_hist);
}

TEST_CASE("train: zero epochs saves the initialization") {
  const fs::path out = work_dir() / "t-zero";
  const RunResult r = run("train --data " + dataset_dir().string() + " --out " +
                          out.string() + " --epochs 0 --c1 2 --c2 4 --c3 4");
  CHECK(r.code == 0);
  CHECK(r.output.find("trained 0 epochs") != std::string::npos);
  CHECK(fs::exists(out / "checkpoint.prm"));
  CHECK(line_count(read_text(out / "history.csv")) == 1);  // header only
}

TEST_CASE("config file supplies values, flags override, typos rejected") {
  write_text(work_dir() / "cfg.json", R"({"epochs": 0, "c1": 2})");
  const fs::path out = work_dir() / "t-cfg";
  const RunResult r = run("train --data " + dataset_dir().string() + " --out " +
                          out.string() + " --config " +
                          (work_dir() / "cfg.json").string() +
                          " --c2 4 --c3 4 --c1 3");
  CHECK(r.code == 0);
  CHECK(r.output.find("trained 0 epochs") != std::string::npos);  // from file

  // The explicit --c1 3 must beat the file's c1=2: parameter counts of the
  // two checkpoints differ.
  write_text(work_dir() / "cfg2.json", R"({"epochs": 0, "c1": 2})");
  const fs::path out2 = work_dir() / "t-cfg2";
  run("train --data " + dataset_dir().string() + " --out " + out2.string() +
      " --config " + (work_dir() / "cfg2.json").string() + " --c2 4 --c3 4");
  const std::size_t with_flag = read_prm(out / "checkpoint.prm").params.size();
  const std::size_t from_file = read_prm(out2 / "checkpoint.prm").params.size();
  CHECK(with_flag > from_file);

  write_text(work_dir() / "bad.json", R"({"epochz": 1})");
  const RunResult bad = run("train --data " + dataset_dir().string() +
                            " --out " + (work_dir() / "t-bad").string() +
                            " --config " + (work_dir() / "bad.json").string());
  CHECK(bad.code == 2);
  CHECK(bad.output.find("epochz") != std::string::npos);

  write_text(work_dir() / "broken.json", "{not json");
  const RunResult broken =
      run("train --data " + dataset_dir().string() + " --out " +
          (work_dir() / "t-broken").string() + " --config " +
          (work_dir() / "broken.json").string());
  CHECK(broken.code == 2);
}

TEST_CASE("eval: self mode is exact and the csv has one row per view") {
  const fs::path csv = work_dir() / "self.csv";
  const RunResult r = run("eval --data " + dataset_dir().string() +
                          " --self --cd-points 500 --out " + csv.string());
  CHECK(r.code == 0);

  const std::string text = read_text(csv);
  CHECK(line_count(text) == 8);  // header + 3*2 rows + mean
  CHECK(text.substr(0, text.find('\n')) == "scene,view,iou,iou_occluded,cd");
  CHECK(text.find("mean,,1.000000,1.000000,0.000000") != std::string::npos);

  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  for (int i = 0; i < 6; ++i) {
    std::getline(in, line);
    CHECK(line.find(",1.000000,1.000000,0.000000") != std::string::npos);
  }
}

TEST_CASE("eval: checkpoint mode writes metrics and error maps") {
  const fs::path ckpt_dir = work_dir() / "t-eval";
  run("train --data " + dataset_dir().string() + " --out " + ckpt_dir.string() +
      " --loss mvc " + kTinyNet);
  const fs::path csv = work_dir() / "eval.csv";
  const RunResult r =
      run("eval --data " + dataset_dir().string() + " --ckpt " +
          (ckpt_dir / "checkpoint.prm").string() + " --cd-points 300 --out " +
          csv.string() + " --threads 1");
  CHECK(r.code == 0);
  const std::string text = read_text(csv);
  CHECK(line_count(text) == 8);
  CHECK(r.output.find("rows=6") != std::string::npos);

  // Self mode with error maps: one PLY per view, quality channel included.
  const fs::path maps = work_dir() / "maps";
  const RunResult r2 = run("eval --data " + dataset_dir().string() +
                           " --self --cd-points 300 --out " +
                           (work_dir() / "self2.csv").string() +
                           " --error-maps " + maps.string());
  CHECK(r2.code == 0);
  std::size_t plys = 0;
  for (const auto& e : fs::directory_iterator(maps)) {
    plys += e.path().extension() == ".ply";
    const PlyData ply = read_ply(e.path());
    CHECK(ply.quality.size() == ply.mesh.vertices.size());
  }
  CHECK(plys == 6);
}

TEST_CASE("mesh: grid input round-trips through obj and ply identically") {
  const fs::path vxg = dataset_dir() / "scenes/scene0000/gt0.vxg";
  REQUIRE(fs::exists(vxg));

  const fs::path obj = work_dir() / "m.obj";
  const fs::path ply = work_dir() / "m.ply";
  const RunResult r1 =
      run("mesh --in " + vxg.string() + " --out " + obj.string());
  const RunResult r2 =
      run("mesh --in " + vxg.string() + " --out " + ply.string());
  CHECK(r1.code == 0);
  CHECK(r2.code == 0);

  const TriangleMesh from_obj = read_obj(obj);
  const PlyData from_ply = read_ply(ply);
  CHECK(!from_obj.empty());
  CHECK(from_obj.vertices.size() == from_ply.mesh.vertices.size());
  CHECK(from_obj.triangles == from_ply.mesh.triangles);

  // Every directed edge must be matched by its reverse: closed surface.
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  for (const auto& t : from_obj.triangles) {
    edges.emplace_back(t[0], t[1]);
    edges.emplace_back(t[1], t[2]);
    edges.emplace_back(t[2], t[0]);
  }
  for (const auto& [u, v] : edges) {
    CHECK(std::count(edges.begin(), edges.end(), std::make_pair(v, u)) == 1);
  }
}

TEST_CASE("mesh: checkpoint input reconstructs from a silhouette") {
  const fs::path ckpt_dir = work_dir() / "t-mesh";
  run("train --data " + dataset_dir().string() + " --out " + ckpt_dir.string() +
      " --loss 3d " + kTinyNet);
  const RunResult r = run("mesh --ckpt " + (ckpt_dir / "checkpoint.prm").string() +
                          " --sil " + (dataset_dir() / "scenes/scene0000/view0.pgm").string() +
                          " --out " + (work_dir() / "net.obj").string());
  CHECK(r.code == 0);
  CHECK(r.output.find("wrote") != std::string::npos);
}

TEST_CASE("exit codes: usage, io, and flag-exclusion errors") {
  CHECK(run("").code == 2);                       // missing subcommand
  CHECK(run("--help").code == 0);                 // help is success
  CHECK(run("gen --out x --bogus 1").code == 2);  // unknown flag
  CHECK(run("train --data " + dataset_dir().string() +
            " --out x --loss nope --epochs 0")
            .code == 2);                          // bad enum value
  CHECK(run("train --data /nonexistent-path --out x --epochs 0").code == 3);
  CHECK(run("eval --data " + dataset_dir().string() + " --out x").code == 2);
  CHECK(run("eval --data " + dataset_dir().string() + " --self --ckpt y --out x")
            .code == 2);                          // both modes at once
  CHECK(run("mesh --in a.vxg --ckpt b.prm --out c.obj").code == 2);
  CHECK(run("mesh --in " + (dataset_dir() / "scenes/scene0000/gt0.vxg").string() +
            " --out bad.stl")
            .code == 2);                          // unsupported extension
  CHECK(run("mesh --in /nonexistent.vxg --out " +
            (work_dir() / "x.obj").string())
            .code == 3);                          // unreadable grid
  CHECK(run("train --data " + dataset_dir().string() + " --out " +
            (work_dir() / "t-neg").string() + " --epochs -3")
            .code == 2);                          // config validation
}
