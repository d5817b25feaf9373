from .gradcheck import grad_check, tiny_configs
from .model import (Batch, Model, ModelConfig, StateError, classification_loss,
                    masked_span_logits, param_names, span_loss)

__all__ = ["Batch", "Model", "ModelConfig", "StateError", "classification_loss",
           "grad_check", "masked_span_logits", "param_names", "span_loss", "tiny_configs"]
