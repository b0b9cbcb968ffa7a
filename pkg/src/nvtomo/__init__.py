"""NV spin-noise projection-reconstruction microscope simulator."""
