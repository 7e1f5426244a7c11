"""Rehearsal-free, task-free online continual learning with class-level contrastive prompts.

A frozen encoder embeds each sample; every class owns a (key, prompt) pair.
Prompts are trained online with a contrastive loss so that a nearest-class-mean
classifier over prompt-augmented embeddings keeps old classes apart from new ones,
without storing samples and without task boundaries.
"""

from .contrastive import LossWeights, batch_loss_and_embedding_grads, class_weights, loss_for_anchor
from .datagen import StreamConfig, StreamSchedule, TestSet, generate_synthetic_stream, load_stream, load_test, save_stream
from .encoder import EncoderConfig, EncoderState, build_encoder, encode_query, encode_with_prompt, grad_wrt_prompt
from .metrics import average_accuracy, average_forgetting, evaluate_group_checkpoint, infer, key_and_ub_metrics
from .ncm import Prototype, PrototypeStore, create_prototype, predict, update_prototype
from .optim import AdamSlot, adam_step
from .pipeline import run_experiment
from .prompt_pool import PromptEntry, PromptPool, insert_class, retrieve_top_k, update_key
from .serialization import load_state, save_state
from .trainer import ModelState, TrainConfig, process_batch, train_stream

__version__ = "0.1.0"
