#include "crackgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>

#include "crackgan/error.hpp"
#include "crackgan/evaluation.hpp"
#include "crackgan/manifest.hpp"

namespace crackgan {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(lr >= 0)) throw ConfigError("train.lr must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (iterations < 1) throw ConfigError("train.iterations must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (eval_every < 1 || eval_every > iterations) throw ConfigError("train.eval_every must lie in [1, train.iterations]");
  if (stage_ratio < 1) throw ConfigError("train.stage_ratio must be >= 1");
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

AdamOptions adam_options(const TrainConfig& c) { return {c.lr, c.beta1, c.beta2, 1e-8}; }

std::vector<Tensor> buffer_snapshot(const Network& net) {
  std::vector<Tensor> out;
  for (const auto& b : net.store().buffers()) out.push_back(b.var.value());
  return out;
}

void buffer_restore(Network& net, const std::vector<Tensor>& saved) {
  auto& buffers = net.store().buffers();
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    Var v = buffers[i].var;
    v.mutable_value() = saved[i];
  }
}

// Adds `g` to the seed already queued for `root`, or queues a new one.
void push_seed(std::vector<Var>& roots, std::vector<Tensor>& seeds, const Var& root, Tensor g) {
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (roots[i].node() == root.node()) {
      seeds[i] += g;
      return;
    }
  }
  roots.push_back(root);
  seeds.push_back(std::move(g));
}

// Side and Tversky terms of the generator objective; returns their sum.
double supervised_terms(const GeneratorOutput& out, const Tensor& masks, const LossConfig& loss,
                        std::vector<Var>& roots, std::vector<Tensor>& seeds) {
  double total = 0.0;
  if (loss.has(LossTerm::side)) {
    std::array<Tensor, 4> side_values;
    for (int i = 0; i < 4; ++i) side_values[i] = out.sides[i].value();
    const auto sl = side_network_loss(side_values, out.fused.value(), masks, loss.beta_p, loss.eps);
    require_finite(sl.value, "side loss");
    total += sl.value;
    for (int i = 0; i < 4; ++i) push_seed(roots, seeds, out.sides[i], sl.side_grads[i]);
    push_seed(roots, seeds, out.fused, sl.fused_grad);
  }
  if (loss.has(LossTerm::tversky)) {
    const auto tl = tversky_loss(out.fused.value(), masks, loss.alpha, loss.beta, loss.eps);
    require_finite(tl.value, "tversky loss");
    total += tl.value;
    push_seed(roots, seeds, out.fused, tl.grad);
  }
  return total;
}

}  // namespace

Trainer::Trainer(const GeneratorSpec& generator, const DiscriminatorSpec& discriminator, const AuxiliarySpec& auxiliary,
                 const TrainConfig& train, const LossConfig& loss)
    : train_(train), loss_(loss) {
  train_.validate();
  loss_.validate();
  generator_ = std::make_unique<Generator>(generator);
  discriminator_ = make_discriminator(discriminator);
  auxiliary_ = make_auxiliary(auxiliary);
  opt_g_ = std::make_unique<Adam>(generator_->store().parameters(), adam_options(train_));
  opt_d_ = std::make_unique<Adam>(discriminator_->store().parameters(), adam_options(train_));
  opt_phi_ = std::make_unique<Adam>(auxiliary_->store().parameters(), adam_options(train_));
}

Stage1Losses Trainer::stage1_step(const Tensor& images, const Tensor& masks) {
  Generator& g = *generator_;
  Discriminator& d = *discriminator_;
  g.set_training(true);
  d.set_training(true);
  const Var x = Var::constant(images);
  const Var y = Var::constant(masks);
  const GeneratorOutput out = g.forward(x);
  Stage1Losses result;

  const bool adversarial = loss_.has(LossTerm::cgan);
  if (adversarial) {
    d.store().set_requires_grad(true);
    const Var d_real = d.forward(pair_input(x, y));
    const Var d_fake = d.forward(pair_input(x, detach(out.fused)));
    const auto cg = cgan_losses(d_real.value(), d_fake.value(), loss_.eps, loss_.generator_form);
    require_finite(cg.loss_d, "discriminator loss");
    result.loss_d = cg.loss_d;
    opt_d_->zero_grad();
    backward({d_real, d_fake}, {cg.grad_d_real, cg.grad_d_fake});
    opt_d_->step();
  }

  std::vector<Var> roots;
  std::vector<Tensor> seeds;
  double loss_g = supervised_terms(out, masks, loss_, roots, seeds);
  if (adversarial) {
    d.store().set_requires_grad(false);
    const Var d_fake = d.forward(pair_input(x, out.fused));
    const auto cg = cgan_losses(d_fake.value(), d_fake.value(), loss_.eps, loss_.generator_form);
    loss_g += loss_.gamma * cg.loss_g;
    Tensor seed = cg.grad_g_fake;
    seed *= loss_.gamma;
    push_seed(roots, seeds, d_fake, std::move(seed));
  }
  require_finite(loss_g, "generator loss");
  result.loss_g = loss_g;
  opt_g_->zero_grad();
  backward(roots, seeds);
  opt_g_->step();
  d.store().set_requires_grad(true);
  return result;
}

Stage2Losses Trainer::stage2_step(const Tensor& images, const Tensor& masks) {
  Generator& g = *generator_;
  PixelDiscriminator& phi = *auxiliary_;
  g.set_training(true);
  phi.set_training(true);
  const Var x = Var::constant(images);
  const Var y = Var::constant(masks);
  Stage2Losses result;

  if (loss_.has(LossTerm::kl)) {
    Tensor generated;
    {
      // G is frozen here, running statistics included.
      const auto saved = buffer_snapshot(g);
      NoGradGuard no_grad;
      generated = g.forward(x).fused.value();
      buffer_restore(g, saved);
    }
    phi.store().set_requires_grad(true);
    const Var p = phi.forward(y);
    const Var q = phi.forward(Var::constant(generated));
    const auto kl = kl_perceptual_loss(p.value(), q.value(), loss_.eps, loss_.kl_form);
    require_finite(kl.value, "KL perceptual loss");
    result.loss_phi = kl.value;
    opt_phi_->zero_grad();
    backward({p, q}, {kl.grad_target, kl.grad_generated});
    opt_phi_->step();
  }

  if (loss_.has(LossTerm::ce)) {
    phi.store().set_requires_grad(false);
    const GeneratorOutput out = g.forward(x);
    const Var p = phi.forward(y);
    const Var q = phi.forward(out.fused);
    const auto rl = reconstruction_loss(p.value(), q.value(), loss_.eps);
    std::vector<Var> roots;
    std::vector<Tensor> seeds;
    double loss_g = rl.value;
    push_seed(roots, seeds, q, rl.grad_generated);
    if (train_.stage2_extra_losses) loss_g += supervised_terms(out, masks, loss_, roots, seeds);
    require_finite(loss_g, "stage-II generator loss");
    result.loss_g = loss_g;
    opt_g_->zero_grad();
    backward(roots, seeds);
    opt_g_->step();
    phi.store().set_requires_grad(true);
  }
  return result;
}

Tensor Trainer::predict(const Tensor& images) {
  generator_->set_training(false);
  NoGradGuard no_grad;
  Tensor fused = generator_->forward(Var::constant(images)).fused.value();
  generator_->set_training(true);
  return fused;
}

Checkpoint Trainer::checkpoint(std::int64_t iteration, const std::map<std::string, std::string>& config) const {
  Checkpoint ck;
  ck.iteration = iteration;
  ck.config = config;
  append_network(ck, "generator", *generator_);
  append_network(ck, "discriminator", *discriminator_);
  append_network(ck, "auxiliary", *auxiliary_);
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  restore_network(ck, "generator", *generator_);
  restore_network(ck, "discriminator", *discriminator_);
  restore_network(ck, "auxiliary", *auxiliary_);
}

double otsu_dice(const Tensor& fused, const Tensor& mask) {
  const ProbabilityMap p = ProbabilityMap::from_tensor(fused, 0);
  const ProbabilityMap m = ProbabilityMap::from_tensor(mask, 0);
  const BinaryMask gt = BinaryMask::from_values(m.height, m.width, m.values);
  return segmentation_scores(otsu_binarize(p), gt).dice;
}

double validation_score(Trainer& trainer, const std::vector<Sample>& val) {
  if (val.empty()) throw ConfigError("validation split is empty");
  Confusion total;
  for (std::size_t i = 0; i < val.size(); ++i) {
    Tensor images, masks;
    assemble_batch(val, {static_cast<int>(i)}, images, masks);
    const Tensor fused = trainer.predict(images);
    total += confusion(otsu_binarize(ProbabilityMap::from_tensor(fused, 0)), val[i].mask);
  }
  return selection_score(segmentation_scores(total));
}

std::size_t best_index(const std::vector<double>& scores) {
  if (scores.empty()) throw InputError("best_index: no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Seeded epoch order over the training set.
class BatchSampler {
 public:
  BatchSampler(int n, std::uint64_t seed) : order_(n), rng_(seed) {
    for (int i = 0; i < n; ++i) order_[i] = i;
    reshuffle();
  }

  std::vector<int> next(int batch) {
    std::vector<int> out;
    for (int k = 0; k < batch; ++k) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_() % i]);
    pos_ = 0;
  }

  std::vector<int> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

}  // namespace

TrainResult train(Trainer& trainer, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::string& out_dir, const std::map<std::string, std::string>& effective_config) {
  if (train_set.empty()) throw ConfigError("training split is empty");
  if (val_set.empty()) throw ConfigError("validation split is empty");
  const TrainConfig& cfg = trainer.train_config();
  const fs::path out(out_dir);
  fs::create_directories(out / "checkpoints");
  std::ofstream log(out / "train_log.csv");
  if (!log) throw InputError("cannot write '" + (out / "train_log.csv").string() + "'");
  log << "iteration,loss_d,loss_g,loss_phi,val_score\n";

  BatchSampler sampler(static_cast<int>(train_set.size()), cfg.seed);
  const int batch = std::min<int>(cfg.batch_size, static_cast<int>(train_set.size()));
  TrainResult result;
  std::vector<double> scores;
  int it = 0;
  try {
    for (it = 1; it <= cfg.iterations; ++it) {
      Tensor images, masks;
      assemble_batch(train_set, sampler.next(batch), images, masks);
      const Stage1Losses s1 = trainer.stage1_step(images, masks);
      Stage2Losses s2;
      if (cfg.stage2 && it % cfg.stage_ratio == 0) s2 = trainer.stage2_step(images, masks);
      log << it << ',' << format_double(s1.loss_d) << ',' << format_double(s1.loss_g + s2.loss_g) << ','
          << format_double(s2.loss_phi) << ',';
      if (it % cfg.eval_every == 0) {
        const double score = validation_score(trainer, val_set);
        const std::string path = (out / "checkpoints" / ("iter_" + std::to_string(it) + ".ckpt")).string();
        save_checkpoint(path, trainer.checkpoint(it, effective_config));
        scores.push_back(score);
        result.history.push_back({it, score, path});
        log << format_double(score);
      }
      log << '\n';
    }
  } catch (const NumericError& e) {
    log.flush();
    save_checkpoint((out / "diverged.ckpt").string(), trainer.checkpoint(it, effective_config));
    throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(it) + "; state saved to " +
                       (out / "diverged.ckpt").string());
  }
  log.flush();

  result.best = result.history[best_index(scores)];
  fs::copy_file(result.best.checkpoint_path, out / "best.ckpt", fs::copy_options::overwrite_existing);
  nlohmann::ordered_json best;
  best["iteration"] = result.best.iteration;
  best["score"] = result.best.score;
  best["checkpoint"] = (out / "best.ckpt").string();
  best["source_checkpoint"] = result.best.checkpoint_path;
  std::ofstream(out / "best.json") << best.dump(2) << '\n';
  const auto& first = train_set.front().mask;
  save_manifest((out / "generator_manifest.txt").string(), trainer.generator().manifest(first.height, first.width));
  return result;
}

OverfitResult overfit_smoke(Trainer& trainer, const Tensor& image, const Tensor& mask, int steps, int check_every) {
  if (steps < 0) throw ConfigError("overfit steps must be >= 0");
  if (check_every < 1) throw ConfigError("overfit check_every must be >= 1");
  const TrainConfig& cfg = trainer.train_config();
  OverfitResult r;
  auto check = [&](int step) {
    const double dice = otsu_dice(trainer.predict(image), mask);
    r.history.emplace_back(step, dice);
    r.best_dice = std::max(r.best_dice, dice);
    return dice;
  };
  r.initial_dice = check(0);
  r.final_dice = r.initial_dice;
  for (int step = 1; step <= steps; ++step) {
    trainer.stage1_step(image, mask);
    if (cfg.stage2 && step % cfg.stage_ratio == 0) trainer.stage2_step(image, mask);
    if (step % check_every == 0 || step == steps) r.final_dice = check(step);
  }
  Generator& g = trainer.generator();
  g.set_training(false);
  {
    NoGradGuard no_grad;
    const GeneratorOutput out = g.forward(Var::constant(image));
    std::array<Tensor, 4> sides;
    for (int i = 0; i < 4; ++i) sides[i] = out.sides[i].value();
    const auto& lc = trainer.loss_config();
    r.final_side_loss = side_network_loss(sides, out.fused.value(), mask, lc.beta_p, lc.eps).value;
  }
  g.set_training(true);
  return r;
}

}  // namespace crackgan
