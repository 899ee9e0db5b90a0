"""Likelihood reward redistribution: per-step reward models fitted to episodic returns.

Modules
-------
nn            dense ReLU networks, manual backprop, Adam
reward_model  Gaussian / skew-normal / fixed-sigma leave-one-out losses
theory        closed-form optima and gradients of the per-step losses
envs          PointMass2D, Pendulum, DelayedChain and the episodic wrapper
sac           Soft Actor-Critic and the relabeling replay buffer
diagnostics   lag-1 reward autocorrelation with Fisher-z intervals
config        YAML experiment configuration
experiment    the training loop and its CSV artifacts
verify        property checks against independent oracles
"""

__version__ = "0.1.0"
