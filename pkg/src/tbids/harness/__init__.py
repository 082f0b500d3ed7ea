"""Networked simulation of key delegation: keyserver, edge signer and client."""
