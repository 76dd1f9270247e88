"""eps-best-arm identification and sequential tests of overlapping hypotheses."""
