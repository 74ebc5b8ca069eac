"""Computational convex geometry for m-th order covariograms.

Bodies and log-concave functions, their m-th order covariograms and
difference/radial-mean bodies, Mellin functionals, polar projection
gauges, and a verdict harness for the inequality chains tying them
together.  Submodules are imported explicitly, e.g.::

    from mthorder import convexcore as cc
    from mthorder import inequalities as iq
"""

__version__ = "0.1.0"
