#include <cstring>
#include <functional>
#include <iostream>
#include <new>
#include <streambuf>
#include <string>

#include "checkpoint.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "error.hpp"
#include "srforge/srforge.h"

using namespace srforge;

struct srf_config {
  cli::RunConfig cfg;
};

struct srf_model {
  io::Checkpoint header;  // shape fields and kind; records are not kept
  mutable nn::Sequential<float> net;
};

namespace {

thread_local std::string g_last_error;

srf_sink g_sink = nullptr;
void* g_sink_user = nullptr;

// Line-buffered bridge from an ostream to the installed sink.
class SinkBuf : public std::streambuf {
 public:
  explicit SinkBuf(int stream) : stream_(stream) {}
  ~SinkBuf() override { flush_line(); }

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return 0;
    line_.push_back(static_cast<char>(ch));
    if (ch == '\n') flush_line();
    return ch;
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    for (std::streamsize i = 0; i < n; ++i) overflow(static_cast<unsigned char>(s[i]));
    return n;
  }
  int sync() override {
    flush_line();
    return 0;
  }

 private:
  void flush_line() {
    if (line_.empty()) return;
    if (g_sink) {
      g_sink(g_sink_user, stream_, line_.data(), line_.size());
    } else {
      std::ostream& os = stream_ == 1 ? std::cout : std::cerr;
      os.write(line_.data(), static_cast<std::streamsize>(line_.size()));
      os.flush();
    }
    line_.clear();
  }
  int stream_;
  std::string line_;
};

srf_status guarded(const std::function<void()>& body) {
  g_last_error.clear();
  try {
    body();
    return SRF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<srf_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SRF_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return SRF_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SRF_INTERNAL;
  }
}

using Command = void (*)(const cli::RunConfig&, std::ostream&, std::ostream&);

srf_status run(const srf_config* cfg, Command cmd) {
  return guarded([&] {
    if (!cfg) fail(ErrorCode::Usage, "null config");
    SinkBuf out_buf(1), log_buf(2);
    std::ostream out(&out_buf), log(&log_buf);
    cmd(cfg->cfg, out, log);
  });
}

}  // namespace

extern "C" {

const char* srf_last_error(void) { return g_last_error.c_str(); }

const char* srf_version(void) { return "1.0.0"; }

void srf_set_sink(srf_sink sink, void* user) {
  g_sink = sink;
  g_sink_user = user;
}

srf_status srf_config_create(srf_config** out) {
  return guarded([&] {
    if (!out) fail(ErrorCode::Usage, "null output pointer");
    *out = new srf_config{};
  });
}

void srf_config_destroy(srf_config* cfg) { delete cfg; }

srf_status srf_config_load(srf_config* cfg, const char* path) {
  return guarded([&] {
    if (!cfg || !path) fail(ErrorCode::Usage, "null argument");
    cfg->cfg.load_file(path);
  });
}

srf_status srf_config_set(srf_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    if (!cfg || !key || !value) fail(ErrorCode::Usage, "null argument");
    cfg->cfg.set(key, value);
  });
}

srf_status srf_config_get(const srf_config* cfg, const char* key, char* buf, size_t cap) {
  return guarded([&] {
    if (!cfg || !key || (!buf && cap)) fail(ErrorCode::Usage, "null argument");
    const auto v = cfg->cfg.maybe(key);
    if (!v) fail(ErrorCode::Usage, std::string("setting '") + key + "' is not set");
    if (cap == 0) return;
    const std::size_t n = std::min(cap - 1, v->size());
    std::memcpy(buf, v->data(), n);
    buf[n] = '\0';
  });
}

srf_status srf_prepare_data(const srf_config* cfg) { return run(cfg, cli::cmd_prepare_data); }
srf_status srf_train_sr(const srf_config* cfg) { return run(cfg, cli::cmd_train_sr); }
srf_status srf_eval_sr(const srf_config* cfg) { return run(cfg, cli::cmd_eval_sr); }
srf_status srf_upscale(const srf_config* cfg) { return run(cfg, cli::cmd_upscale); }
srf_status srf_count_params(const srf_config* cfg) { return run(cfg, cli::cmd_count_params); }
srf_status srf_train_srcgan(const srf_config* cfg) { return run(cfg, cli::cmd_train_srcgan); }
srf_status srf_eval_srcgan(const srf_config* cfg) { return run(cfg, cli::cmd_eval_srcgan); }
srf_status srf_train_classifier(const srf_config* cfg) { return run(cfg, cli::cmd_train_classifier); }
srf_status srf_init_model(const srf_config* cfg) { return run(cfg, cli::cmd_init_model); }

srf_status srf_model_create(const srf_config* cfg, srf_model** out) {
  return guarded([&] {
    if (!cfg || !out) fail(ErrorCode::Usage, "null argument");
    auto ckpt = cli::initial_sr_checkpoint(cfg->cfg);
    auto net = io::load_sr_model(ckpt);
    ckpt.records.clear();
    *out = new srf_model{std::move(ckpt), std::move(net)};
  });
}

srf_status srf_model_load(const char* path, srf_model** out) {
  return guarded([&] {
    if (!path || !out) fail(ErrorCode::Usage, "null argument");
    auto ckpt = io::load_checkpoint(path);
    auto net = io::load_sr_model(ckpt);
    ckpt.records.clear();
    *out = new srf_model{std::move(ckpt), std::move(net)};
  });
}

srf_status srf_model_save(const srf_model* model, const char* path) {
  return guarded([&] {
    if (!model || !path) fail(ErrorCode::Usage, "null argument");
    io::Checkpoint c = model->header;
    c.records.clear();
    io::append_parameters(c, "model.", model->net);
    io::save_checkpoint(path, c);
  });
}

void srf_model_destroy(srf_model* model) { delete model; }

srf_status srf_model_parameter_count(const srf_model* model, int include_bias, uint64_t* out) {
  return guarded([&] {
    if (!model || !out) fail(ErrorCode::Usage, "null argument");
    *out = models::count_parameters(model->net, include_bias != 0);
  });
}

srf_status srf_model_forward(const srf_model* model, const float* in, size_t width, size_t height, float* out) {
  return guarded([&] {
    if (!model || !in || !out) fail(ErrorCode::Usage, "null argument");
    if (width == 0 || height == 0) fail(ErrorCode::Usage, "empty plane");
    Tensor x({1, 1, height, width});
    std::copy_n(in, width * height, x.raw());
    const Tensor y = model->net.forward(x, nn::Mode::Eval);
    std::copy_n(y.raw(), width * height, out);
  });
}

}  // extern "C"
