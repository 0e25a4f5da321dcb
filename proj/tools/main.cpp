#include <CLI11.hpp>

#include "commands.hpp"

namespace {

void add_data_options(CLI::App* app, wdro::cli::DataConfig& data) {
  app->add_option("--data", data.path, "CSV dataset (header x1,...,xd,y[,p]); generated when absent");
  app->add_option("--n", data.n, "generated sample size")->capture_default_str();
  app->add_option("--d", data.d, "generated dimension")->capture_default_str();
  app->add_option("--seed", data.seed, "dataset and corruption seed")->capture_default_str();
  app->add_option("--flip-fraction", data.flip_fraction, "fraction of labels to flip")->capture_default_str();
  app->add_option("--adv-fraction", data.adv_fraction, "fraction of points made adversarial")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace wdro::cli;
  CLI::App app{"Wasserstein-robust linear classification: training, oracles, experiments, analytic checks"};
  app.require_subcommand(1);

  TrainConfig train;
  auto* t = app.add_subcommand("train", "minimize the smoothed regularized loss from random restarts");
  add_data_options(t, train.data);
  t->add_option("--loss", train.loss, "ramp|sramp|shinge (training needs sramp or shinge)")->capture_default_str();
  t->add_option("--sigma", train.sigma, "smoothing temperature")->capture_default_str();
  t->add_option("--epsilon-bar", train.epsilon_bar, "squared-norm regularization weight")->capture_default_str();
  t->add_option("--starts", train.starts, "number of random restarts")->capture_default_str();
  t->add_option("--method", train.method, "cg|lbfgs")->capture_default_str();
  t->add_option("--lbfgs-memory", train.lbfgs_memory)->capture_default_str();
  t->add_option("--grad-tol", train.grad_tol)->capture_default_str();
  t->add_option("--max-iters", train.max_iters)->capture_default_str();
  t->add_option("--wolfe-c1", train.wolfe_c1)->capture_default_str();
  t->add_option("--wolfe-c2", train.wolfe_c2)->capture_default_str();
  t->add_option("--max-linesearch", train.max_linesearch)->capture_default_str();
  t->add_option("--start-seed", train.start_seed, "seed of the restart points")->capture_default_str();
  t->add_option("--reference", train.reference, "reference direction for sin(theta), default e1")->delimiter(',');
  t->add_flag("--trace", train.trace, "include per-iteration traces");
  t->add_option("--out", train.out, "report path (default $WDRO_OUT_DIR/train.json)");

  OracleConfig oracle;
  auto* o = app.add_subcommand("oracle", "worst-case misclassification probability, CVaR and margins");
  add_data_options(o, oracle.data);
  o->add_option("--w", oracle.w, "hyperplane normal, comma separated")->delimiter(',')->required();
  o->add_option("--b", oracle.b, "intercept")->capture_default_str();
  o->add_option("--epsilon", oracle.epsilon, "Wasserstein radius")->capture_default_str();
  o->add_option("--rho", oracle.rho, "CVaR level")->capture_default_str();
  o->add_option("--out", oracle.out, "report path (default $WDRO_OUT_DIR/oracle.json)");

  ReproduceConfig repro;
  auto* r = app.add_subcommand("reproduce", "rerun one of the synthetic experiment tables");
  r->add_option("--table", repro.table, "T1|T2|T3|T4")->capture_default_str();
  r->add_option("--scale", repro.scale, "shrinks n, restart and dataset counts, in (0, 1]")->capture_default_str();
  r->add_option("--seed", repro.seed)->capture_default_str();
  r->add_option("--starts", repro.starts, "restarts for the ramp loss")->capture_default_str();
  r->add_option("--hinge-starts", repro.hinge_starts, "restarts for the convex hinge loss")->capture_default_str();
  r->add_option("--datasets", repro.datasets, "datasets per row (T3)")->capture_default_str();
  r->add_option("--method", repro.method, "cg|lbfgs")->capture_default_str();
  r->add_option("--out", repro.out, "CSV path (default $WDRO_OUT_DIR/<table>.csv)");
  r->add_option("--trends-out", repro.trends_out, "trend JSON path (default next to the CSV)");

  CertifyConfig certify;
  auto* c = app.add_subcommand("certify-analytic", "check the closed-form minimizer of the uniform model");
  c->add_option("--epsilon", certify.epsilons, "regularization weights, comma separated")->delimiter(',');
  c->add_option("--grid-per-axis", certify.grid_per_axis)->capture_default_str();
  c->add_option("--scan-grid", certify.scan_grid)->capture_default_str();
  c->add_option("--box", certify.box, "scan box half-width")->capture_default_str();
  c->add_option("--out", certify.out, "report path (default $WDRO_OUT_DIR/certify.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  if (*t) return cmd_train(train);
  if (*o) return cmd_oracle(oracle);
  if (*r) return cmd_reproduce(repro);
  return cmd_certify_analytic(certify);
}
