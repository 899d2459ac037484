"""
Root package initialization.
""" 