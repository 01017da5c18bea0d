"""Static configuration, scenario files & paths"""
