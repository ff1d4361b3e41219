#pragma once

#include "evlab/degrade.hpp"
#include "evlab/model.hpp"
#include "evlab/simulator.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evlab {

// Fixed random-feature stand-in for a pretrained perceptual metric: L2
// distance between the activations of a seeded 3-scale conv pyramid.
// Differentiable with respect to the first argument.
class PerceptualProxy {
public:
    explicit PerceptualProxy(std::uint64_t seed);

    Tensor operator()(const Tensor& a, const Tensor& b) const;
    double value(const Image& a, const Image& b) const;

private:
    Tensor features_loss(const Tensor& a, const Tensor& b) const;
    Conv2dLayer c1_, c2_, c3_;
};

// KL(N(mu, diag e^logvar) || N(0, I)) summed over elements:
// 0.5 * sum(mu^2 + e^logvar - 1 - logvar)
Tensor kl_standard_normal(const Tensor& mu, const Tensor& logvar);
double kl_standard_normal_value(const std::vector<double>& mu,
                                const std::vector<double>& logvar);

// ---- corpus building -------------------------------------------------------

struct RecipeRanges {
    double noise_sigma_min = 0.01, noise_sigma_max = 0.08;
    int blur_length_min = 1, blur_length_max = 7;
    double resize_scale_min = 0.4, resize_scale_max = 0.8;
    double edge_sigma_min = 0.5, edge_sigma_max = 1.6;
    double edge_break_min = 0.1, edge_break_max = 0.5;
    int blotch_count_min = 0, blotch_count_max = 4;

    static RecipeRanges from_config(const KvConfig& cfg);
};

// per-image recipe derived from (seed, index)
DegradationRecipe sample_recipe(std::uint64_t seed, const RecipeRanges& ranges);

struct CorpusEntry {
    std::string lq_path;
    std::string hq_path;
    std::uint64_t seed = 0;
};

struct Corpus {
    std::vector<CorpusEntry> entries;
};

// One LQ per readable HQ image, manifest lines "lq_path hq_path seed".
// Unreadable inputs are skipped with a warning comment in the manifest.
// Existing LQ files whose bytes match the recorded hash are not rewritten.
Corpus build_surrogate_corpus(const std::string& hq_dir, const RecipeRanges& ranges,
                              std::uint64_t seed, const std::string& out_dir);
Corpus load_corpus_manifest(const std::string& out_dir);

// ---- video data for stages 2-3 ---------------------------------------------

struct VideoClip {
    std::vector<Image> color;
    std::vector<std::uint64_t> timestamps;
    std::string dir;

    FrameSequence luma_sequence() const;
};

VideoClip load_video_clip(const std::string& dir);
std::vector<std::string> list_video_dirs(const std::string& root);

// one voxel grid per consecutive frame pair, bounds [ts_i, ts_{i+1})
std::vector<VoxelGrid> voxelize_between_frames(const EventStream& events,
                                               const std::vector<std::uint64_t>& timestamps,
                                               int t_bins);

// integration from a flat mid-gray start (events carry no absolute
// brightness), snapshots at timestamps[1..], clamped to [0,1]
std::vector<Image> coarse_integration_frames(const EventStream& events, double c_pos,
                                             double c_neg, double log_eps, int h, int w,
                                             const std::vector<std::uint64_t>& timestamps);

// channel-adapted tensor for the codec (gray replicated to RGB etc.)
Tensor image_input_tensor(const Image& img, int channels);

// ---- stage contexts ---------------------------------------------------------

struct StageLosses {
    double total = 0.0;
    double latent = 0.0;
    double perceptual = 0.0;
    double kl = 0.0;
    double flow = 0.0;
};

// Stage 0: codec pretraining (VAE reconstruction + KL) on HQ images.
class Stage0Context {
public:
    Stage0Context(const ModelConfig& mcfg, std::uint64_t seed, const AdamW::Config& opt,
                  double kl_weight);

    StageLosses step(const std::vector<Image>& hq_batch, Rng& rng);
    double val_mae(const std::vector<Image>& hq) const;
    double val_mse(const std::vector<Image>& hq) const;

    LatentCodec codec;
    std::unique_ptr<AdamW> optimizer;
    double kl_weight;
    ModelConfig mcfg;
};

// Stage 1: one-step diffusion training on LQ/HQ pairs; the surrogate
// encoder (initialized from the pretrained codec encoder) and the denoiser
// train, the target codec stays frozen.
class Stage1Context {
public:
    Stage1Context(const ModelConfig& mcfg, std::uint64_t seed, const AdamW::Config& opt,
                  double lambda1, double lambda2);

    void init_from_codec(const LatentCodec& pretrained);

    StageLosses step(const std::vector<Image>& lq, const std::vector<Image>& hq);
    double val_latent_mse(const std::vector<Image>& lq, const std::vector<Image>& hq) const;

    Tensor predict_latent(const Image& lq) const; // os_diff(surrogate_encode(lq))

    ModelConfig mcfg;
    LatentCodec codec;     // frozen: z_gt encoder + decoder for the perceptual term
    LatentCodec surrogate; // trainable encoder half
    Denoiser denoiser;
    DiffusionSchedule schedule;
    PerceptualProxy proxy;
    std::unique_ptr<AdamW> optimizer;
    double lambda1, lambda2;
};

// Frozen teacher for stage 2: coarse integration frames pushed through the
// stage-1 surrogate encoder produce z_vae.
struct SurrogateTeacher {
    const LatentCodec* surrogate = nullptr;
    int image_channels = 3;

    std::vector<Tensor> encode_coarse(const std::vector<Image>& coarse) const;
};

// Stage 2: distills the teacher latents into the EvEncoder; only the
// student updates.
class Stage2Context {
public:
    Stage2Context(const ModelConfig& mcfg, std::uint64_t seed, const AdamW::Config& opt);

    StageLosses step(const std::vector<VoxelGrid>& voxels, const std::vector<Tensor>& z_vae);
    double val_latent_mse(const std::vector<VoxelGrid>& voxels,
                          const std::vector<Tensor>& z_vae) const;

    ModelConfig mcfg;
    LatentCodec codec;     // frozen
    LatentCodec surrogate; // frozen teacher
    Denoiser denoiser;     // frozen (carried through the bundle)
    EvEncoder student;     // trainable
    DiffusionSchedule schedule;
    SurrogateTeacher teacher;
    std::unique_ptr<AdamW> optimizer;
};

// Stage 3: joint fine-tuning of the inference path (student, denoiser,
// decoder); the target encoder stays frozen.
class Stage3Context {
public:
    Stage3Context(const ModelConfig& mcfg, std::uint64_t seed, const AdamW::Config& opt,
                  double lambda1, double lambda2, double lambda3);

    StageLosses step(const std::vector<VoxelGrid>& voxels, const std::vector<Image>& gt);
    std::vector<Image> reconstruct_sequence(const std::vector<VoxelGrid>& voxels) const;

    ModelConfig mcfg;
    LatentCodec codec; // encoder frozen, decoder trainable
    LatentCodec surrogate;
    Denoiser denoiser;
    EvEncoder student;
    DiffusionSchedule schedule;
    PerceptualProxy proxy;
    std::unique_ptr<AdamW> optimizer;
    double lambda1, lambda2, lambda3;
};

// warped temporal-consistency variant for data with known flow:
// || (pred_t - warp(pred_prev)) - (gt_t - warp(gt_prev)) ||_1 where warp
// pulls each pixel from (y - flow_y, x - flow_x) in the previous frame
Tensor flow_warped_l1(const Tensor& pred_t, const Tensor& pred_prev, const Tensor& gt_t,
                      const Tensor& gt_prev, const Image& flow_y, const Image& flow_x);

// ---- run_stage ---------------------------------------------------------------

struct TrainingConfig {
    int stage = 0;
    std::int64_t iterations = 200;
    int batch_size = 4;
    int seq_len = 8;
    double lambda1 = 1.0, lambda2 = 2.0, lambda3 = 1.0;
    double lr = 1e-3;
    double weight_decay = 0.0;
    double kl_weight = 1e-4;
    std::uint64_t seed = 1;
    std::string corpus_dir;     // stages 0-1
    std::string video_dir;      // stages 2-3
    std::string checkpoint_dir; // prerequisites in, results out
    std::int64_t val_interval = 25;
    double val_fraction = 0.1;
    bool deterministic = true;

    SimConfig sim;
    std::uint64_t merge_window_us = 500;
    double drop_prob = 0.1;
    KillRectParams kill;

    ModelConfig model;

    static TrainingConfig from_config(const KvConfig& cfg);
    KvConfig to_config() const;
};

struct StageResult {
    std::string checkpoint_path;
    std::string metrics_path;
    double first_val = 0.0;
    double last_val = 0.0;
    double final_loss = 0.0;
};

// Drives one stage end to end: checks prerequisites (stage n needs the
// stage n-1 checkpoint), iterates the stage's step op, validates
// periodically, writes the checkpoint bundle and a CSV metrics log.
StageResult run_stage(const TrainingConfig& cfg);

std::string stage_checkpoint_name(int stage);

} // namespace evlab
