#include <doctest.h>

#include "motionseg/config.hpp"
#include "support.hpp"

using namespace motionseg;

TEST_CASE("defaults mirror the paper's hyperparameters") {
  RunConfig c;
  CHECK(c.tau_static == 0.5);
  CHECK(c.pseudo.tau_fg == 2.5);
  CHECK(c.pseudo.tau_grad == 20.0);
  CHECK(c.loss.r_bg == 0.2);
  CHECK(c.loss.tau_drop == 0.99);
  CHECK(c.stage1_lr == 4e-6);
  CHECK(c.stage1_epochs == 15);
  CHECK(c.stage2_lr == 4e-5);
  CHECK(c.stage2_epochs == 1);
  CHECK(c.batch_size == 8);
  CHECK(c.mlp_layers == 4);
  CHECK(c.mlp_hidden == 2048);
  CHECK(c.slots == 60);
}

TEST_CASE("config round trips through text") {
  RunConfig c;
  c.tau_static = 1.7;
  c.pseudo.tau_grad = 1.0 / 3.0;
  c.pseudo.gradient = GradientOperator::Central;
  c.pseudo.clustering.allow_single_cluster = false;
  c.loss.eps = 1e-9;
  c.stage2_lr = 0.1 + 0.2;
  c.seed = 18446744073709551615ull;
  c.jobs = 3;
  const auto text = format_run_config(c);
  const auto back = parse_run_config(text);
  CHECK(format_run_config(back) == text);
  CHECK(back.pseudo.tau_grad == c.pseudo.tau_grad);
  CHECK(back.stage2_lr == c.stage2_lr);
  CHECK(back.seed == c.seed);
  CHECK(back.pseudo.gradient == GradientOperator::Central);
}

TEST_CASE("config parsing errors") {
  auto code = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code("mystery = 1\n") == ErrorCode::BadConfig);
  CHECK(code("tau_fg = abc\n") == ErrorCode::BadConfig);
  CHECK(code("batch_size = 0\n") == ErrorCode::BadConfig);
  CHECK(code("just words\n") == ErrorCode::BadConfig);
  CHECK(code("drop_gating = maybe\n") == ErrorCode::BadConfig);
  const auto partial = parse_run_config("# comment\n tau_fg = 3  # trailing\n\n");
  CHECK(partial.pseudo.tau_fg == 3.0);
  CHECK(partial.pseudo.tau_grad == 20.0);
}
