"""Auditable machine unlearning.

A server maintains a training set under a three-part commitment (model
hash, training-set tree root, unlearnt-set chain root), retrains on every
change, and proves in zero-interactivity that (a) the deployed model was
trained on exactly the committed dataset, (b) the unlearnt set only ever
grows and never intersects the training set, and (c) any requested point
is a member of the unlearnt set.  Verifiers check everything from the
commitments alone.
"""

__version__ = "0.1.0"
