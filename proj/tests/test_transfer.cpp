#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "molstyle/smiles.hpp"
#include "molstyle/transfer.hpp"
#include "oracles.hpp"

using namespace molstyle;
using namespace molstyle::transfer;
using nn::Index;

namespace {

const std::vector<std::string> kSmiles{"CCO",          "CCN",         "c1ccccc1O",  "CC(=O)O",  "CCCC",
                                       "c1ccncc1",     "CC(C)O",      "OCCN",       "CC(=O)N",  "c1ccccc1C",
                                       "CCOC",         "NCC(=O)O",    "CCCCO",      "c1ccoc1",  "CC#N"};

vae::VaeModel tiny_vae(int latent = 12) {
  std::vector<std::array<double, vae::kAttributes>> rows;
  for (const auto& s : kSmiles) rows.push_back(vae::raw_attributes(smiles::read(s)));
  vae::VaeConfig c;
  c.token_embed_dim = 6;
  c.hidden_dim = 10;
  c.rnn_layers = 1;
  c.latent_dim = latent;
  c.head_hidden = 4;
  c.max_length = 20;
  vae::VaeModel m(c, vae::Vocabulary::build(kSmiles), vae::fit_attributes(rows));
  m.freeze();
  return m;
}

TransferConfig tiny_config() {
  TransferConfig c;
  c.instances = 4;
  c.batch_size = 5;
  c.g_hidden = 9;
  c.d_hidden = 7;
  c.flow.steps = 2;
  c.flow.hidden = 13;
  c.flow.context_dim = 3;
  c.iterations = 10;
  c.decode_count = 6;
  return c;
}

LatentPool random_pool(int n, int d, double shift, std::uint64_t seed) {
  nn::Rng rng(seed);
  LatentPool p;
  p.latents = nn::standard_normal(n, d, rng);
  p.latents.array() += shift;
  for (int i = 0; i < n; ++i) p.smiles.push_back(kSmiles[static_cast<std::size_t>(i) % kSmiles.size()]);
  return p;
}

// Worst relative error between analytic and central-difference gradients
// over every `stride`-th entry of the given parameters.
template <class F>
double worst_grad_error(nn::ParamSet& params, F&& loss, int stride = 1) {
  params.zero_grad();
  nn::backward(loss());
  double worst = 0;
  for (auto p : params.vars()) {
    for (Index i = 0; i < p.value().size(); i += stride) {
      const double fd = oracle::central_difference([&] { return loss().item(); }, p.mutable_value().data()[i]);
      const double an = p.grad().data()[i];
      if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
      worst = std::max(worst, oracle::rel_error(an, fd));
    }
  }
  return worst;
}

void set_all(nn::ParamSet& p, double v) {
  for (auto x : p.vars()) x.mutable_value().setConstant(v);
}

}  // namespace

TEST_CASE("config validation and json round trip") {
  auto c = tiny_config();
  c.validate();
  const auto j = to_json(c);
  const auto back = transfer_config_from_json(j);
  CHECK(to_json(back) == j);
  auto bad = j;
  bad["dropout"] = 0.1;
  CHECK_THROWS_AS(transfer_config_from_json(bad), std::invalid_argument);
  bad = j;
  bad["flow"]["depth"] = 3;
  CHECK_THROWS_AS(transfer_config_from_json(bad), std::invalid_argument);
  c.disc_ratio = 0;
  CHECK_THROWS(c.validate());
  c = tiny_config();
  c.w_cycle = -1;
  CHECK_THROWS(c.validate());
  CHECK(TransferConfig{}.instances == 10);
  CHECK(TransferConfig{}.disc_ratio == 5);
  CHECK(TransferConfig{}.gp_weight == 10);
  CHECK(TransferConfig{}.decode_count == 10);
  CHECK(TransferConfig{}.flow.steps == 6);
}

TEST_CASE("generator: zero weights, determinism, shapes, gradients") {
  TransferModel m(6, tiny_config(), "h");
  nn::Rng rng(1);
  const Mat zc = nn::standard_normal(3, 6, rng), hs = nn::standard_normal(3, 6, rng);
  const Mat a = m.generate(Var::constant(zc), Var::constant(hs)).value();
  CHECK(a.rows() == 3);
  CHECK(a.cols() == 6);
  CHECK(a == m.generate(Var::constant(zc), Var::constant(hs)).value());
  CHECK_THROWS_AS(m.generate(Var::constant(Mat::Zero(3, 5)), Var::constant(hs)), DimensionMismatch);
  CHECK_THROWS_AS(m.generate(Var::constant(zc), Var::constant(Mat::Zero(2, 6))), DimensionMismatch);

  const double worst = worst_grad_error(m.generator_params(), [&] {
    return nn::sum(nn::square(m.generate(Var::constant(zc), Var::constant(hs))));
  });
  CHECK(worst < 1e-3);

  TransferModel z(6, tiny_config(), "h");
  set_all(z.generator_params(), 0.0);
  CHECK(z.generate(Var::constant(zc), Var::constant(hs)).value() == Mat::Zero(3, 6));
}

TEST_CASE("class probabilities and class nll") {
  nn::Rng rng(3);
  const Mat logits = nn::standard_normal(6, kClasses, rng) * 3;
  const Mat p = class_probabilities(logits);
  for (Index i = 0; i < p.rows(); ++i) CHECK(std::abs(p.row(i).sum() - 1) < 1e-6);

  CHECK(class_nll(Var::constant(Mat::Zero(4, 3)), kTarget).item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  Mat sure = Mat::Zero(2, 3);
  sure.col(kTarget).setConstant(800);
  CHECK(class_nll(Var::constant(sure), kTarget).item() < 1e-12);
  double prev = 1e9;
  for (double up : {-2.0, 0.0, 1.0, 3.0}) {
    Mat l = Mat::Zero(1, 3);
    l(0, kTarget) = up;
    const double v = class_nll(Var::constant(l), kTarget).item();
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("style and adversarial losses: uniform D and decomposition") {
  TransferModel m(5, tiny_config(), "h");
  set_all(m.discriminator_params(), 0.0);  // uniform over three classes
  nn::Rng rng(2);
  auto batch = [&] { return Var::constant(nn::standard_normal(4, 5, rng)); };
  const double ln3 = std::log(3.0);
  CHECK(style_loss(m, batch()).item() == doctest::Approx(ln3).epsilon(1e-12));
  const auto adv = adversarial_losses(m, batch(), batch(), batch(), batch(), batch());
  CHECK(adv.source.item() == doctest::Approx(2 * ln3).epsilon(1e-12));
  CHECK(adv.target.item() == doctest::Approx(2 * ln3).epsilon(1e-12));
  CHECK(adv.fake.item() == doctest::Approx(ln3).epsilon(1e-12));

  TransferModel r(5, tiny_config(), "h");
  const auto a2 = adversarial_losses(r, batch(), batch(), batch(), batch(), batch());
  CHECK(std::abs(a2.total().item() - (a2.source.item() + a2.target.item() + a2.fake.item())) < 1e-8);

  // A D whose bias dominates each class in turn drives that class's term to zero.
  TransferModel p(5, tiny_config(), "h");
  set_all(p.discriminator_params(), 0.0);
  Var last_b = p.discriminator_params().vars().back();
  last_b.mutable_value()(0, kFake) = 900;
  CHECK(class_nll(p.logits(batch()), kFake).item() < 1e-12);
}

TEST_CASE("style loss gradient reaches generator and flow parameters") {
  TransferModel m(4, tiny_config(), "h");
  nn::Rng rng(5);
  const Mat zc = nn::standard_normal(3, 4, rng);
  const auto prior = flow::batch_prior(nn::standard_normal(4, 4, rng));
  const Mat z0 = m.flow().sample(prior, 3, rng).z0;
  const double worst = worst_grad_error(m.generator_params(), [&] {
    const auto code = m.flow().transform(prior, z0);
    return style_loss(m, m.generate(Var::constant(zc), code.h_s));
  });
  CHECK(worst < 1e-3);
  const double worst_d = worst_grad_error(m.discriminator_params(), [&] {
    const auto code = m.flow().transform(prior, z0);
    return style_loss(m, m.generate(Var::constant(zc), code.h_s));
  });
  CHECK(worst_d < 1e-3);
}

TEST_CASE("gradient penalty: constant D, near-linear unit D, sign, finite differences") {
  const int d = 4;
  nn::Rng rng(8);
  const Mat real = nn::standard_normal(5, d, rng), fake = nn::standard_normal(5, d, rng);

  TransferModel c(d, tiny_config(), "h");
  set_all(c.discriminator_params(), 0.0);
  const auto flat = gradient_penalty(c, real, fake, rng);
  CHECK(flat.penalty.item() == doctest::Approx(1.0).epsilon(1e-5));

  // Logit 0 = x_0 through two tanh layers kept in their linear range; the
  // other real class is pushed to -inf so the logsumexp equals logit 0.
  TransferModel lin(d, tiny_config(), "h");
  set_all(lin.discriminator_params(), 0.0);
  const auto& v = lin.discriminator_params().vars();
  const double eps = 1e-4;
  Var w0 = v[0], w1 = v[2], w2 = v[4], b2 = v[5];
  w0.mutable_value()(0, 0) = eps;
  w1.mutable_value()(0, 0) = 1.0;
  w2.mutable_value()(0, kSource) = 1.0 / eps;
  b2.mutable_value()(0, kTarget) = -800;
  const auto unit = gradient_penalty(lin, real, fake, rng);
  CHECK(unit.penalty.item() < 1e-10);
  for (double n : unit.grad_norms) CHECK(n == doctest::Approx(1.0).epsilon(1e-6));

  TransferModel r(d, tiny_config(), "h");
  for (int i = 0; i < 5; ++i) CHECK(gradient_penalty(r, real, fake, rng).penalty.item() >= 0);

  Mat u(5, 1);
  u << 0.1, 0.5, 0.9, 0.3, 0.7;
  const double worst = worst_grad_error(r.discriminator_params(),
                                        [&] { return gradient_penalty(r, real, fake, u).penalty; });
  CHECK(worst < 1e-3);
  CHECK_THROWS_AS(gradient_penalty(r, real, Mat::Zero(4, d), rng), DimensionMismatch);
}

TEST_CASE("reconstruction and cycle losses") {
  nn::Rng rng(4);
  const Mat z = nn::standard_normal(3, 5, rng);
  CHECK(latent_nll(Var::constant(z), z).item() == 0.0);
  Mat shifted = z;
  shifted.col(0).array() += 1.0;
  CHECK(latent_nll(Var::constant(shifted), z).item() == doctest::Approx(0.5).epsilon(1e-12));

  // cycle loss with G the identity in its first argument reduces to
  // ½||z_g - z_c||² averaged over rows
  const Mat zg = nn::standard_normal(3, 5, rng);
  const double expected = 0.5 * (zg - z).squaredNorm() / 3;
  CHECK(latent_nll(Var::constant(zg), z).item() == doctest::Approx(expected).epsilon(1e-12));
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(3);
  perm.indices() << 2, 0, 1;
  CHECK(latent_nll(Var::constant(perm * zg), perm * z).item() == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(latent_nll(Var::constant(zg), Mat::Zero(2, 5)), DimensionMismatch);

  TransferModel m(5, tiny_config(), "h");
  const auto prior = flow::batch_prior(nn::standard_normal(4, 5, rng));
  const Mat z0 = m.flow().sample(prior, 3, rng).z0;
  CHECK(worst_grad_error(m.generator_params(), [&] {
          return recon_loss(m, z, m.flow().transform(prior, z0).h_s);
        }) < 1e-3);
  CHECK(worst_grad_error(m.generator_params(), [&] {
          const Var h = m.flow().transform(prior, z0).h_s;
          return cycle_loss(m, z, m.generate(Var::constant(z), h), h);
        }) < 1e-3);
}

TEST_CASE("sample_indices draws distinct indices outside the exclusion") {
  nn::Rng rng(6);
  const std::vector<int> ex{0, 3, 4};
  for (int rep = 0; rep < 50; ++rep) {
    const auto idx = sample_indices(10, 4, ex, rng);
    CHECK(std::set<int>(idx.begin(), idx.end()).size() == 4);
    for (int i : idx) {
      CHECK(i >= 0);
      CHECK(i < 10);
      CHECK(std::find(ex.begin(), ex.end(), i) == ex.end());
    }
  }
  CHECK(sample_indices(7, 7, {}, rng).size() == 7);
  CHECK_THROWS_AS(sample_indices(6, 4, ex, rng), EmptyPool);
}

TEST_CASE("training loop accounting, logging and the frozen VAE") {
  const auto vae = tiny_vae(10);
  const auto source = random_pool(30, 10, -1.0, 1);
  const auto target = random_pool(30, 10, 1.0, 2);
  for (int n : {1, 5}) {
    auto cfg = tiny_config();
    cfg.disc_ratio = n;
    cfg.iterations = 23;
    cfg.w_style = 0.7;
    cfg.w_recon = 1.3;
    cfg.w_cycle = 0.4;
    TrainLog log;
    int callbacks = 0;
    TrainOptions opts;
    opts.on_iteration = [&](const DStepLog&, const GStepLog*) { ++callbacks; };
    const auto model = train(vae, source, target, cfg, opts, &log);
    CHECK(log.d_updates == 23);
    CHECK(log.g_updates == (23 + n - 1) / n);
    CHECK(std::abs(log.d_updates - n * log.g_updates) < n);
    CHECK(callbacks == 23);
    CHECK(log.vae_hash_before == log.vae_hash_after);
    CHECK(log.vae_hash_before == vae.params().hash());
    for (const auto& g : log.g_steps) {
      CHECK(g.iteration % n == 0);
      CHECK(std::abs(g.total - (0.7 * g.style + 1.3 * g.recon + 0.4 * g.cycle)) < 1e-6);
    }
    for (const auto& d : log.d_steps) {
      CHECK(d.penalty >= 0);
      CHECK(d.fake_accuracy >= 0);
      CHECK(d.fake_accuracy <= 1);
    }
  }
}

TEST_CASE("training is deterministic and checkpoints round-trip") {
  const auto vae = tiny_vae(10);
  const auto source = random_pool(30, 10, -1.0, 1);
  const auto target = random_pool(30, 10, 1.0, 2);
  const auto cfg = tiny_config();
  const auto a = train(vae, source, target, cfg);
  const auto b = train(vae, source, target, cfg);
  CHECK(a->generator_params().hash() == b->generator_params().hash());
  CHECK(a->discriminator_params().hash() == b->discriminator_params().hash());
  auto other = cfg;
  other.seed = 2;
  CHECK(train(vae, source, target, other)->generator_params().hash() != a->generator_params().hash());

  const auto dir = std::filesystem::temp_directory_path() / "molstyle_transfer_test";
  std::filesystem::create_directories(dir);
  a->save(dir / "m.ckpt");
  const auto back = TransferModel::load(dir / "m.ckpt");
  CHECK(back->generator_params().hash() == a->generator_params().hash());
  CHECK(back->discriminator_params().hash() == a->discriminator_params().hash());
  CHECK(to_json(back->config()) == to_json(a->config()));
  back->require_vae(vae);
  CHECK_THROWS_AS(back->require_vae(tiny_vae(11)), VaeHashMismatch);
  {
    std::ofstream junk(dir / "junk.ckpt");
    junk << "nope\n";
  }
  CHECK_THROWS_AS(TransferModel::load(dir / "junk.ckpt"), nn::CheckpointError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training rejects small pools and rolls back on divergence") {
  const auto vae = tiny_vae(10);
  auto cfg = tiny_config();
  CHECK_THROWS_AS(train(vae, random_pool(6, 10, 0, 1), random_pool(30, 10, 0, 2), cfg), EmptyPool);
  CHECK_THROWS_AS(train(vae, random_pool(30, 10, 0, 1), random_pool(3, 10, 0, 2), cfg), EmptyPool);
  CHECK_THROWS_AS(train(vae, random_pool(30, 9, 0, 1), random_pool(30, 9, 0, 2), cfg), DimensionMismatch);

  cfg.g_optim.learning_rate = 1e300;
  cfg.d_optim.learning_rate = 1e300;
  cfg.iterations = 50;
  TransferModel m(10, cfg, vae.params().hash());
  const std::string g0 = m.generator_params().hash();
  TrainOptions opts;
  opts.checkpoint_every = 1000;
  CHECK_THROWS_AS(train_model(m, vae, random_pool(30, 10, 0, 1), random_pool(30, 10, 0, 2), opts, nullptr),
                  NonFiniteLoss);
  CHECK(m.generator_params().hash() == g0);
}

TEST_CASE("candidate selection matches exhaustive search") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  int qualified = 0;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<Candidate> cands(1 + rep % 9);
    for (auto& c : cands) {
      c.valid = u(rng) < 0.7;
      c.pss = std::round(u(rng) * 10) / 10;  // coarse values force ties
      c.improvement = std::round(u(rng) * 4 - 2);
    }
    int best = -1, fallback = -1;
    for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
      const auto& c = cands[static_cast<std::size_t>(i)];
      if (!c.valid) continue;
      bool beats_all = c.pss > 0.7;
      for (int j = 0; j < static_cast<int>(cands.size()) && beats_all; ++j) {
        const auto& o = cands[static_cast<std::size_t>(j)];
        if (!o.valid || o.pss <= 0.7 || j == i) continue;
        if (o.improvement > c.improvement || (o.improvement == c.improvement && j < i)) beats_all = false;
      }
      if (beats_all) best = i;
      if (fallback < 0 || c.pss > cands[static_cast<std::size_t>(fallback)].pss) fallback = i;
    }
    const auto s = select_candidate(cands, 0.7);
    CHECK(s.qualified == (best >= 0));
    CHECK(s.index == (best >= 0 ? best : fallback));
    if (s.qualified) {
      ++qualified;
      CHECK(cands[static_cast<std::size_t>(s.index)].pss > 0.7);
    }
  }
  CHECK(qualified > 100);
}

TEST_CASE("transfer scores every candidate and applies the selection") {
  const auto vae = tiny_vae(10);
  const auto target = random_pool(30, 10, 1.0, 2);
  auto cfg = tiny_config();
  cfg.decode_count = 12;
  TransferModel m(10, cfg, vae.params().hash());
  // spread the outputs so several decodes differ
  for (auto v : m.generator_params().vars()) v.mutable_value() *= 4.0;

  metrics::Scorers scorers;
  std::vector<chem::MolGraph> graphs;
  for (const auto& s : kSmiles) graphs.push_back(smiles::read(s));
  scorers.sa_table = chem::FragmentFreqTable::build(graphs);
  scorers.tox = chem::ToxModel::zeros();
  std::vector<chem::PropertyVector> props;
  for (const auto& g : graphs) props.push_back(chem::content_properties(g));
  const auto scales = metrics::PssScales::fit(props);
  const auto task = metrics::TaskSpec::synthesizability();
  const Evaluation eval{task, scorers, scales};

  for (const auto& input : kSmiles) {
    const auto r = transfer::transfer(input, target, m, vae, eval, 11);
    REQUIRE(r.candidates.size() == 12);
    CHECK(r.output == r.candidates[static_cast<std::size_t>(r.chosen)].smiles);
    // exhaustive re-scoring of every candidate
    const auto gx = smiles::read(input);
    int best = -1;
    double best_imp = -1e300;
    for (std::size_t c = 0; c < r.candidates.size(); ++c) {
      const auto gy = smiles::read_valid(r.candidates[c].smiles);
      CHECK(gy.has_value() == r.candidates[c].valid);
      if (!gy) continue;
      const double p = metrics::pss(chem::content_properties(gx), chem::content_properties(*gy), scales);
      const double imp = chem::sa_score(gx, scorers.sa_table) - chem::sa_score(*gy, scorers.sa_table);
      CHECK(r.candidates[c].pss == doctest::Approx(p).epsilon(1e-12));
      CHECK(r.candidates[c].improvement == doctest::Approx(imp).epsilon(1e-12));
      if (p > cfg.pss_floor && imp > best_imp) {
        best_imp = imp;
        best = static_cast<int>(c);
      }
    }
    CHECK(r.qualified == (best >= 0));
    const auto pick = select_candidate(r.candidates, cfg.pss_floor);
    CHECK(r.chosen == (pick.index >= 0 ? pick.index : 0));
    if (best >= 0) CHECK(r.chosen == best);
    const auto again = transfer::transfer(input, target, m, vae, eval, 11);
    CHECK(again.output == r.output);
  }

  CHECK_THROWS_AS(transfer::transfer("C1CC", target, m, vae, eval, 1), InvalidInput);
  CHECK_THROWS_AS(transfer::transfer("CCCl", target, m, vae, eval, 1), InvalidInput);  // Cl is out of vocabulary

  auto one = cfg;
  one.decode_count = 1;
  TransferModel single(10, one, vae.params().hash());
  CHECK(transfer::transfer("CCO", target, single, vae, eval, 5).output == transfer::transfer("CCO", target, single, vae, eval, 5).output);

  const std::vector<std::string> inputs{"CCO", "CCN", "CCCC"};
  const auto rep = evaluate(inputs, target, m, vae, eval);
  CHECK(rep.records.size() == 3);
  double succ = 0;
  for (const auto& rec : rep.records) succ += rec.success;
  CHECK(rep.sr == succ / 3);
  CHECK(metrics::summary_text(rep) == metrics::summary_text(evaluate(inputs, target, m, vae, eval)));
  CHECK_THROWS_AS(evaluate({}, target, m, vae, eval), metrics::EmptyTestSet);
}
