// Runs the installed command-line binary as a child process.
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "support.hpp"

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(SRFORGE_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST_CASE("exit codes for usage and I/O failures") {
  CHECK(sh("").code == 1);
  CHECK(sh("--help").code == 0);
  CHECK(sh("no-such-command").code == 1);
  CHECK(sh("count-params --no-such-flag").code == 1);
  CHECK(sh("count-params --set bogus=1").code == 1);
  CHECK(sh("eval-sr --checkpoint /nonexistent.srfg --dataset /tmp").code == 2);
  CHECK(sh("train-sr --out-dir /tmp/x").code == 1);
  CHECK(sh("--version").out.find('.') != std::string::npos);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  support::TempDir tmp("cli");
  std::ofstream(tmp / "run.cfg") << "# widths for the table\nwidths = 128\n";
  const auto from_file = sh("count-params --config " + (tmp / "run.cfg").string());
  CHECK(from_file.code == 0);
  CHECK(from_file.out.find("\n128,32,no,") != std::string::npos);
  CHECK(from_file.out.find("\n64,") == std::string::npos);

  const auto flagged = sh("count-params --config " + (tmp / "run.cfg").string() + " --widths 256");
  CHECK(flagged.out.find("\n256,32,no,313344,884736") != std::string::npos);
  CHECK(flagged.out.find("\n128,") == std::string::npos);

  const auto set = sh("count-params --config " + (tmp / "run.cfg").string() + " --set widths=64");
  CHECK(set.out.find("\n64,32,no,74880") != std::string::npos);

  std::ofstream(tmp / "bad.cfg") << "widht = 64\n";
  CHECK(sh("count-params --config " + (tmp / "bad.cfg").string()).code == 1);
}

TEST_CASE("a diverging run exits with the numeric code") {
  support::TempDir tmp("clinum");
  support::write_images(tmp / "img", 1, 42, 42, 1);
  const std::string manifest = (tmp / "m.txt").string();
  REQUIRE(sh("prepare-data --src " + (tmp / "img").string() + " --manifest " + manifest +
             " --scales 2 --patch 21 --stride 21 --no-augment")
              .code == 0);
  const auto r = sh("train-sr --manifest " + manifest + " --out-dir " + (tmp / "out").string() +
                    " --depth 3 --width 8 --cardinality 2 --base-channels 8 --batch-size 4 --epochs 40"
                    " --lr 1e12 --clip-mode none");
  CHECK(r.code == 3);
  CHECK(std::filesystem::exists(tmp / "out" / "last_good.srfg"));
}
