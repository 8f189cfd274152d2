#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crackgan/auxiliary.hpp"
#include "crackgan/checkpoint.hpp"
#include "crackgan/data_pipeline.hpp"
#include "crackgan/discriminators.hpp"
#include "crackgan/generator.hpp"
#include "crackgan/losses.hpp"
#include "crackgan/optimizer.hpp"

namespace crackgan {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.2;
  double beta2 = 0.999;
  int iterations = 50000;  // Stage-I steps
  int batch_size = 8;
  int eval_every = 2000;
  int stage_ratio = 1;  // Stage-I steps per Stage-II step
  bool stage2 = true;
  // Adds the side and Tversky terms to the Stage-II generator objective.
  bool stage2_extra_losses = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Stage1Losses {
  double loss_d = 0.0;
  double loss_g = 0.0;
};

struct Stage2Losses {
  double loss_phi = 0.0;
  double loss_g = 0.0;
};

// Owns the three networks and one Adam optimizer per network.
class Trainer {
 public:
  Trainer(const GeneratorSpec& generator, const DiscriminatorSpec& discriminator, const AuxiliarySpec& auxiliary,
          const TrainConfig& train, const LossConfig& loss);

  // D update on (X, Y) vs (X, G(X)), then a G update on
  // γ·L_cGAN + L_Side + L_TL (enabled terms only).
  Stage1Losses stage1_step(const Tensor& images, const Tensor& masks);

  // Φ update on L_KL with G frozen, then a G update on the reconstruction
  // loss with Φ frozen.
  Stage2Losses stage2_step(const Tensor& images, const Tensor& masks);

  // Fused maps in inference mode, N×1×H×W.
  Tensor predict(const Tensor& images);

  Generator& generator() noexcept { return *generator_; }
  Discriminator& discriminator() noexcept { return *discriminator_; }
  PixelDiscriminator& auxiliary() noexcept { return *auxiliary_; }
  const TrainConfig& train_config() const noexcept { return train_; }
  const LossConfig& loss_config() const noexcept { return loss_; }

  Checkpoint checkpoint(std::int64_t iteration, const std::map<std::string, std::string>& config) const;
  void restore(const Checkpoint& checkpoint);

 private:
  TrainConfig train_;
  LossConfig loss_;
  std::unique_ptr<Generator> generator_;
  std::unique_ptr<Discriminator> discriminator_;
  std::unique_ptr<PixelDiscriminator> auxiliary_;
  std::unique_ptr<Adam> opt_g_, opt_d_, opt_phi_;
};

struct SelectionRecord {
  std::int64_t iteration = 0;
  double score = 0.0;
  std::string checkpoint_path;
};

struct TrainResult {
  SelectionRecord best;
  std::vector<SelectionRecord> history;
};

// Validation score: Otsu-binarized fused maps, dataset-aggregated counts,
// mean of dice, accuracy, sensitivity and specificity.
double validation_score(Trainer& trainer, const std::vector<Sample>& val);

// Index of the maximum; ties go to the earliest entry.
std::size_t best_index(const std::vector<double>& scores);

// Writes <out>/train_log.csv, <out>/checkpoints/iter_<n>.ckpt at every
// evaluation, <out>/best.ckpt, <out>/best.json and
// <out>/generator_manifest.txt. A non-finite loss saves
// <out>/diverged.ckpt and rethrows.
TrainResult train(Trainer& trainer, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::string& out_dir, const std::map<std::string, std::string>& effective_config);

struct OverfitResult {
  double initial_dice = 0.0;
  double final_dice = 0.0;
  double best_dice = 0.0;  // running maximum over the checks
  double final_side_loss = 0.0;  // side-network loss of the final inference-mode maps
  std::vector<std::pair<int, double>> history;
};

// Training steps on a single tile (Stage II interleaved when the trainer's
// config enables it); dice of the Otsu-binarized fused map is checked every
// `check_every` steps and after the last one.
OverfitResult overfit_smoke(Trainer& trainer, const Tensor& image, const Tensor& mask, int steps,
                            int check_every = 100);

// Dice of the Otsu-binarized first fused map against mask plane 0.
double otsu_dice(const Tensor& fused, const Tensor& mask);

}  // namespace crackgan
