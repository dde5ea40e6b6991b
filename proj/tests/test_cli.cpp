/*
Copyright 2026 The apose Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(APOSE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path workdir() {
  const fs::path d = fs::temp_directory_path() / "apose_cli_tests";
  fs::create_directories(d);
  return d;
}

std::string small_corpus(const fs::path& dir) {
  return "--corpus " + dir.string() +
         " --subjects 2 --distances 0,100 --duration 2 --empty_duration 1 --held_out 2 --threads 1";
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with code 2") {
    CHECK(run("") == 2);
    CHECK(run("bogus") == 2);
    CHECK(run("train --no-such-flag 1") == 2);
    CHECK(run("synth --duration 0 --corpus " + (workdir() / "never").string()) == 2);
    CHECK(run("train --k -1") == 2);
  }

  TEST_CASE("print-config dumps the resolved configuration") {
    const fs::path out = workdir() / "printed.txt";
    const std::string cmd = std::string(APOSE_CLI_PATH) + " train --wgamma 0 --print-config > " + out.string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    const std::string text = slurp(out);
    CHECK(text.find("wbeta = 10") != std::string::npos);
    CHECK(text.find("wgamma = 0") != std::string::npos);
    CHECK(text.find("k = 16") != std::string::npos);
  }

  TEST_CASE("format errors exit with code 3") {
    const fs::path bad = workdir() / "bad.wav";
    std::ofstream(bad) << "not a wav file";
    const fs::path csv = workdir() / "bad.csv";
    std::ofstream(csv) << "frame_idx\n";
    CHECK(run("ingest --wav " + bad.string() + " --csv " + csv.string() + " --output " + (workdir() / "x.apds").string()) == 3);
    const fs::path cfg = workdir() / "bad.cfg";
    std::ofstream(cfg) << "what is this\n";
    CHECK(run("synth --config " + cfg.string()) == 3);
  }

  TEST_CASE("missing checkpoint is an error") {
    CHECK(run("eval --checkpoint " + (workdir() / "none.apck").string()) != 0);
  }

  TEST_CASE("synth, ingest, augment, train, eval and plot") {
    const fs::path a = workdir() / "corpus_a", b = workdir() / "corpus_b", out = workdir() / "run";
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(out);
    REQUIRE(run("synth " + small_corpus(a)) == 0);
    REQUIRE(run("synth " + small_corpus(b)) == 0);
    CHECK(slurp(a / "dataset.apds") == slurp(b / "dataset.apds"));
    CHECK(slurp(a / "s1_d0.wav") == slurp(b / "s1_d0.wav"));
    CHECK(fs::exists(a / "manifest.csv"));
    CHECK(fs::exists(a / "empty_room.apds"));

    const std::string session = "--wav " + (a / "s1_d0.wav").string() + " --csv " + (a / "s1_d0.csv").string();
    REQUIRE(run("ingest " + session + " --output " + (out / "s1.apds").string()) == 0);
    REQUIRE(run("augment " + session + " --output " + (out / "s1_aug.apds").string()) == 0);
    CHECK(fs::file_size(out / "s1_aug.apds") > 2 * fs::file_size(out / "s1.apds"));

    const std::string train = "train " + small_corpus(a) + " --out " + out.string() +
                              " --n 4 --k 4 --batch_size 4 --max_steps 6";
    REQUIRE(run(train) == 0);
    for (const char* f : {"model.apck", "loss.csv", "report.csv", "report.txt", "config.txt"}) CHECK(fs::exists(out / f));
    CHECK(slurp(out / "loss.csv").rfind("step,l_pose,l_smooth,l_std,l_disc_ce,total\n", 0) == 0);

    const std::string model = " --checkpoint " + (out / "model.apck").string();
    CHECK(run("eval " + small_corpus(a) + " --out " + out.string() + model) == 0);
    CHECK(run("eval " + small_corpus(a) + " --out " + out.string() + " --split train" + model) == 0);
    const std::string report = slurp(out / "eval_test.csv");
    CHECK(report.find("\n0cm,") != std::string::npos);
    CHECK(report.find("\n100cm,") != std::string::npos);

    CHECK(run("plot --kind loss --loss-csv " + (out / "loss.csv").string() + " --out " + out.string()) == 0);
    CHECK(run("plot --kind pca " + small_corpus(a) + " --out " + out.string()) == 0);
    CHECK(run("plot --kind skeleton " + small_corpus(a) + " --out " + out.string() + model + " --frames 3") == 0);
    for (const char* f : {"loss.svg", "pca.svg", "skeleton.svg"}) CHECK(fs::exists(out / f));
  }
}
