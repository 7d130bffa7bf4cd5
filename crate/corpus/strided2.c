void strided2(int n, int *a, int *b) {
    for (int i = 0; i < n; i += 2) {
        a[i] = b[i] + 1;
    }
}
