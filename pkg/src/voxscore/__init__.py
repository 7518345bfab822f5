"""Voxel-based assembly-automation capability scoring.

The pipeline: tessellated CAD geometry (STL/OBJ) is voxelized into a dense
solid occupancy grid, expert 0-10 capability answers are encoded as 11-neuron
activation curves, and a from-scratch 3D convolutional network is trained to
predict those curves. The peak height of a predicted curve doubles as a
confidence signal.
"""

__version__ = "0.1.0"
