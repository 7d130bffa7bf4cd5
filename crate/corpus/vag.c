void vag(int n, int *a, int *b, int *ip) {
    for (int i = 0; i < n; i++) {
        a[i] = b[ip[i]];
    }
}
