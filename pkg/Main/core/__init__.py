"""Experiment logic: polarization state, sweeps, CHSH and the mission controller"""
