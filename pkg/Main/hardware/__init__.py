"""Payload models: pump laser and crystals, collection optics, detectors, thermal"""
