#include "commands.hpp"
#include "rsvl/error.hpp"
#include "rsvl/train.hpp"

namespace cli {

namespace {

struct TrainOptions {
  std::filesystem::path image_features;
  std::filesystem::path text_features;
  std::filesystem::path out_dir;
  rsvl::TrainConfig cfg;
};

ordered_json config_json(const TrainOptions& o) {
  const auto& c = o.cfg;
  ordered_json j;
  j["image_features"] = o.image_features.string();
  j["text_features"] = o.text_features.string();
  j["out_dir"] = o.out_dir.string();
  j["temperature"] = c.temperature;
  j["batch_per_device"] = c.batch_per_device;
  j["devices"] = c.devices;
  j["lr_numerator"] = c.base_lr_numerator;
  j["lr_denominator"] = c.base_lr_denominator;
  j["weight_decay"] = c.weight_decay;
  j["epochs"] = c.epochs;
  j["warmup_epochs"] = c.warmup_epochs;
  j["crop_scale_min"] = c.crop_scale_min;
  j["crop_scale_max"] = c.crop_scale_max;
  j["input_size"] = c.input_size;
  j["beta1"] = c.adam_beta1;
  j["beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["embed_dim"] = c.embed_dim;
  j["seed"] = c.seed;
  return j;
}

void write_head(const rsvl::ProjectionHead& h, const std::filesystem::path& dir,
                const std::string& name, Report& rep) {
  auto w = dir / (name + ".weight.rseb");
  auto b = dir / (name + ".bias.rseb");
  rsvl::write_embeddings(h.weight_matrix(), w);
  rsvl::write_embeddings(h.bias_matrix(), b);
  rep.output(name + ".weight", w);
  rep.output(name + ".bias", b);
}

Outcome run(const TrainOptions& o) {
  Report rep("train");
  auto [images, texts] = validated([&] {
    rsvl::validate(o.cfg);
    auto img = rsvl::read_embeddings(o.image_features);
    auto txt = rsvl::read_embeddings(o.text_features);
    if (img.rows() != txt.rows()) {
      throw UsageError("image features have " + std::to_string(img.rows()) +
                       " rows, text features " + std::to_string(txt.rows()));
    }
    if (img.rows() < o.cfg.global_batch()) {
      throw UsageError(std::to_string(img.rows()) + " pairs is less than one global batch of " +
                       std::to_string(o.cfg.global_batch()));
    }
    return std::pair{std::move(img), std::move(txt)};
  });
  rep.config() = config_json(o);
  rep.seed(o.cfg.seed);
  rep.input("image_features", o.image_features);
  rep.input("text_features", o.text_features);

  auto pairs = rsvl::aligned_pairs(images.rows());
  auto fitted = rsvl::fit(images, texts, pairs, o.cfg);

  std::filesystem::create_directories(o.out_dir);
  write_head(fitted.image_head, o.out_dir, "image_head", rep);
  write_head(fitted.text_head, o.out_dir, "text_head", rep);
  auto history = o.out_dir / "history.jsonl";
  rsvl::write_history(fitted.history, history);
  rep.output("history", history);

  const auto& last = fitted.history.back();
  auto& r = rep.result();
  r["pairs"] = images.rows();
  r["global_batch"] = o.cfg.global_batch();
  r["steps_per_epoch"] = fitted.steps_per_epoch;
  r["total_steps"] = fitted.history.size();
  r["effective_lr"] = rsvl::effective_lr(o.cfg);
  r["final_loss"] = last.loss;
  r["final_loss_i2t"] = last.loss_i2t;
  r["final_loss_t2i"] = last.loss_t2i;

  Table t({"metric", "value"});
  t.row({"pairs", std::to_string(images.rows())});
  t.row({"steps", std::to_string(fitted.history.size())});
  t.row({"effective lr", fixed(rsvl::effective_lr(o.cfg) * 1e5, 6) + "e-5"});
  t.row({"final loss", fixed(last.loss, 4)});
  t.row({"final loss i2t", fixed(last.loss_i2t, 4)});
  t.row({"final loss t2i", fixed(last.loss_t2i, 4)});
  return {std::move(rep), t.str(), t.csv()};
}

}  // namespace

Subcommand add_train(CLI::App& root) {
  auto o = std::make_shared<TrainOptions>();
  auto* app = root.add_subcommand(
      "train", "Fit image and text projection heads on paired frozen features with symmetric InfoNCE");
  auto& c = o->cfg;
  app->add_option("--image-features", o->image_features, "RSEB image features, row i pairs with text row i")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--text-features", o->text_features, "RSEB text features")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--out-dir", o->out_dir, "Directory for head RSEB files and history.jsonl")->required();
  app->add_option("--temperature", c.temperature, "InfoNCE temperature");
  app->add_option("--batch-per-device", c.batch_per_device, "Batch size per device");
  app->add_option("--devices", c.devices, "Device count; global batch = devices * batch-per-device");
  app->add_option("--lr-numerator", c.base_lr_numerator,
                  "Peak lr = devices * batch * numerator / denominator");
  app->add_option("--lr-denominator", c.base_lr_denominator, "See --lr-numerator");
  app->add_option("--weight-decay", c.weight_decay, "AdamW decoupled weight decay");
  app->add_option("--epochs", c.epochs, "Training epochs");
  app->add_option("--warmup-epochs", c.warmup_epochs, "Linear warmup epochs before cosine decay");
  app->add_option("--crop-scale-min", c.crop_scale_min, "Random resized crop, smallest area fraction");
  app->add_option("--crop-scale-max", c.crop_scale_max, "Random resized crop, largest area fraction");
  app->add_option("--input-size", c.input_size, "Encoder input resolution in pixels");
  app->add_option("--beta1", c.adam_beta1, "AdamW beta1");
  app->add_option("--beta2", c.adam_beta2, "AdamW beta2");
  app->add_option("--adam-eps", c.adam_eps, "AdamW epsilon");
  app->add_option("--embed-dim", c.embed_dim, "Shared embedding width");
  app->add_option("--seed", c.seed, "Seed for head init and batch shuffles");
  auto common = add_common(app);
  return {app, common, [o] { return run(*o); }};
}

}  // namespace cli
