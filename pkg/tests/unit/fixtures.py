from ibca.datamodel.config import ModelConfig, TrainConfig


def tiny_model_config(**overrides):
    values = dict(image_size=4, patch_size=2, in_channels=3, n_classes=3, embed_dim=8, n_heads=2,
                  n_blocks=1, mlp_ratio=2.0, seed=0)
    values.update(overrides)
    return ModelConfig(**values)


def tiny_train_config(**overrides):
    values = dict(variant='full', beta=0.001, lambda_s=0.01, learning_rate=1e-3, batch_size=4, epochs=2,
                  alpha0=10.0, seed=0)
    values.update(overrides)
    return TrainConfig(**values)
